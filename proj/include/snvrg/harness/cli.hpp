#pragma once

#include <ostream>

namespace snvrg::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitSuiteFailed = 2;

/**
 * Subcommands:
 *   derive-schedule --b0 N [--m X]
 *   run --config FILE [--seed S] [--out DIR] [--jobs J] [--wall-time]
 *   verify [--suite NAME] [--seed S]
 *   classify --config FILE --point FILE
 *
 * Returns 0 on success, 1 on invalid input, 2 when a verification suite fails.
 */
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace snvrg::harness
