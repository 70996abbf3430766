#include "snvrg/harness/config.hpp"

#include "snvrg/fixtures.hpp"

#include <json.hpp>

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <vector>

namespace snvrg::harness {

namespace {

using json = nlohmann::json;
using ordered = nlohmann::ordered_json;

/// Line of every object key, addressed by dotted path ("algorithm.overrides.U").
std::map<std::string, int> key_lines(const std::string& text) {
  std::map<std::string, int> out;
  std::vector<char> kinds;
  std::vector<std::string> names;
  std::string last_key;
  int line = 1;
  auto prefix = [&] {
    std::string p;
    for (const auto& n : names) {
      if (n.empty()) continue;
      if (!p.empty()) p += '.';
      p += n;
    }
    return p;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
    } else if (c == '"') {
      std::string s;
      std::size_t j = i + 1;
      for (; j < text.size() && text[j] != '"'; ++j) {
        if (text[j] == '\\' && j + 1 < text.size()) ++j;
        s += text[j];
      }
      i = j;
      std::size_t k = j + 1;
      while (k < text.size() && text[k] != '\n' && std::isspace(static_cast<unsigned char>(text[k]))) ++k;
      if (k < text.size() && text[k] == ':' && !kinds.empty() && kinds.back() == '{') {
        const std::string p = prefix();
        out.emplace(p.empty() ? s : p + "." + s, line);
        last_key = s;
      }
    } else if (c == '{' || c == '[') {
      if (kinds.empty()) {
        names.emplace_back();
      } else {
        names.push_back(kinds.back() == '{' ? last_key : std::string("[]"));
      }
      kinds.push_back(c);
    } else if (c == '}' || c == ']') {
      if (!kinds.empty()) {
        kinds.pop_back();
        names.pop_back();
      }
    }
  }
  return out;
}

int line_at_offset(const std::string& text, std::size_t offset) {
  int line = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

class Context {
 public:
  Context(std::string source, const std::string& text) : source_(std::move(source)), lines_(key_lines(text)) {}

  [[noreturn]] void fail(const std::string& path, const std::string& message) const {
    std::string probe = path;
    while (!probe.empty()) {
      if (auto it = lines_.find(probe); it != lines_.end()) throw ConfigParseError(source_, it->second, path, message);
      const auto dot = probe.rfind('.');
      probe = dot == std::string::npos ? std::string() : probe.substr(0, dot);
    }
    throw ConfigParseError(source_, 1, path, message);
  }

 private:
  std::string source_;
  std::map<std::string, int> lines_;
};

/// Typed access to one JSON object; rejects keys that were never read.
class Section {
 public:
  Section(const json& obj, std::string path, const Context& ctx) : obj_(obj), path_(std::move(path)), ctx_(ctx) {
    if (!obj_.is_object()) ctx_.fail(path_.empty() ? "(root)" : path_, "expected an object");
  }

  [[nodiscard]] std::string path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  std::optional<double> number(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_number()) ctx_.fail(path(key), "expected a number");
    return v->get<double>();
  }

  std::optional<std::int64_t> integer(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_number_integer()) ctx_.fail(path(key), "expected an integer");
    if (v->is_number_unsigned() && v->get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX))
      ctx_.fail(path(key), "integer out of range");
    return v->get<std::int64_t>();
  }

  std::optional<std::uint64_t> count(const std::string& key, std::uint64_t min) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_number_integer()) ctx_.fail(path(key), "expected an integer");
    if (v->is_number_integer() && !v->is_number_unsigned() && v->get<std::int64_t>() < 0)
      ctx_.fail(path(key), "must be at least " + std::to_string(min));
    const auto value = v->get<std::uint64_t>();
    if (value < min) ctx_.fail(path(key), "must be at least " + std::to_string(min));
    return value;
  }

  std::optional<std::string> string(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_string()) ctx_.fail(path(key), "expected a string");
    return v->get<std::string>();
  }

  std::optional<bool> boolean(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_boolean()) ctx_.fail(path(key), "expected true or false");
    return v->get<bool>();
  }

  std::optional<Section> object(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    return Section(*v, path(key), ctx_);
  }

  template <typename T>
  T required(std::optional<T> v, const std::string& key) const {
    if (!v) ctx_.fail(path(key), "required field is missing");
    return *v;
  }

  void reject_unknown() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) ctx_.fail(path(it.key()), "unknown key");
    }
  }

  [[nodiscard]] const Context& context() const { return ctx_; }

 private:
  const json& obj_;
  std::string path_;
  const Context& ctx_;
  std::set<std::string> seen_;
};

void check_open_unit(const Section& s, const std::string& key, double v) {
  if (!(v > 0 && v < 1)) s.context().fail(s.path(key), "must lie in (0, 1)");
}

void check_positive(const Section& s, const std::string& key, const std::optional<double>& v) {
  if (v && !(*v > 0 && std::isfinite(*v))) s.context().fail(s.path(key), "must be positive");
}

void check_nonnegative(const Section& s, const std::string& key, const std::optional<double>& v) {
  if (v && !(*v >= 0 && std::isfinite(*v))) s.context().fail(s.path(key), "must be nonnegative");
}

ProblemSpec parse_problem(Section s) {
  ProblemSpec p;
  const std::string family = s.required(s.string("family"), "family");
  if (family == "saddle") {
    p.family = Family::saddle;
  } else if (family == "regularized") {
    p.family = Family::regularized;
  } else if (family == "quadratic") {
    p.family = Family::quadratic;
  } else {
    s.context().fail(s.path("family"), "unknown family '" + family + "' (saddle, regularized, quadratic)");
  }
  p.dim = s.required(s.integer("dim"), "dim");
  p.n = s.required(s.integer("n"), "n");
  p.seed = s.count("seed", 0).value_or(0);
  p.negative_eigenvalue = s.number("negative_eigenvalue");
  p.quartic_weight = s.number("quartic_weight");
  p.radius = s.number("radius");
  p.noise = s.number("noise");
  p.curvature_noise = s.number("curvature_noise");
  p.regularizer_weight = s.number("regularizer_weight");
  s.reject_unknown();

  const std::int64_t min_dim = p.family == Family::saddle ? 2 : 1;
  if (p.dim < min_dim) s.context().fail(s.path("dim"), "must be at least " + std::to_string(min_dim));
  const std::int64_t min_n = p.family == Family::regularized ? 2 : 1;
  if (p.n < min_n) s.context().fail(s.path("n"), "must be at least " + std::to_string(min_n));
  if (p.negative_eigenvalue && p.family == Family::saddle && !(*p.negative_eigenvalue < 0))
    s.context().fail(s.path("negative_eigenvalue"), "must be negative");
  if (p.negative_eigenvalue && !std::isfinite(*p.negative_eigenvalue))
    s.context().fail(s.path("negative_eigenvalue"), "must be finite");
  check_positive(s, "quartic_weight", p.quartic_weight);
  check_positive(s, "radius", p.radius);
  check_nonnegative(s, "noise", p.noise);
  check_nonnegative(s, "curvature_noise", p.curvature_noise);
  check_nonnegative(s, "regularizer_weight", p.regularizer_weight);

  auto only = [&](const char* key, bool present, std::initializer_list<Family> allowed) {
    if (!present) return;
    for (Family f : allowed)
      if (f == p.family) return;
    s.context().fail(s.path(key), "not used by family '" + family + "'");
  };
  only("negative_eigenvalue", p.negative_eigenvalue.has_value(), {Family::saddle, Family::quadratic});
  only("quartic_weight", p.quartic_weight.has_value(), {Family::saddle});
  only("radius", p.radius.has_value(), {Family::saddle});
  only("curvature_noise", p.curvature_noise.has_value(), {Family::saddle, Family::quadratic});
  only("regularizer_weight", p.regularizer_weight.has_value(), {Family::regularized});
  return p;
}

AlgorithmSpec parse_algorithm(Section s) {
  AlgorithmSpec a;
  const std::string mode = s.string("mode").value_or("finite");
  if (mode == "finite") {
    a.mode = Mode::finite;
  } else if (mode == "online") {
    a.mode = Mode::online;
  } else {
    s.context().fail(s.path("mode"), "expected 'finite' or 'online'");
  }
  const auto order = s.integer("smoothness_order").value_or(2);
  if (order != 2 && order != 3) s.context().fail(s.path("smoothness_order"), "expected 2 or 3");
  a.smoothness_order = static_cast<int>(order);
  a.eps = s.required(s.number("eps"), "eps");
  check_open_unit(s, "eps", a.eps);
  a.eps_H = s.required(s.number("eps_H"), "eps_H");
  check_open_unit(s, "eps_H", a.eps_H);
  a.sqrt3_step = s.boolean("sqrt3_step").value_or(false);
  a.boost_target = s.number("boost_target");
  if (a.boost_target) check_open_unit(s, "boost_target", *a.boost_target);

  if (auto o = s.object("overrides")) {
    a.overrides.B0 = o->count("B0", 4);
    a.overrides.U = o->count("U", 1);
    a.overrides.M = o->number("M");
    check_positive(*o, "M", a.overrides.M);
    a.overrides.eta = o->number("eta");
    check_positive(*o, "eta", a.overrides.eta);
    a.overrides.B0_check = o->count("B0_check", 1);
    o->reject_unknown();
  }
  s.reject_unknown();
  return a;
}

template <typename J, typename T>
void put(J& obj, const char* key, const std::optional<T>& v) {
  if (v) obj[key] = *v;
}

}  // namespace

std::string to_string(Family f) {
  switch (f) {
    case Family::saddle: return "saddle";
    case Family::regularized: return "regularized";
    case Family::quadratic: return "quadratic";
  }
  return "?";
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const int line = line_at_offset(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ConfigParseError(source, line, "", "invalid JSON: " + std::string(e.what()));
  }
  const Context ctx(source, text);
  Section root(doc, "", ctx);
  ExperimentConfig c;
  auto problem = root.object("problem");
  if (!problem) ctx.fail("problem", "required section is missing");
  c.problem = parse_problem(*problem);
  auto algorithm = root.object("algorithm");
  if (!algorithm) ctx.fail("algorithm", "required section is missing");
  c.algorithm = parse_algorithm(*algorithm);
  c.trials = root.count("trials", 1).value_or(1);
  c.seed = root.count("seed", 0).value_or(0);
  c.output_dir = root.string("output_dir");
  root.reject_unknown();

  if (c.algorithm.smoothness_order == 3 && c.problem.family != Family::saddle)
    ctx.fail("algorithm.smoothness_order", "third-order configs need a family with an L3 bound (saddle)");
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigParseError(path, 0, "", "cannot open file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

std::string to_json(const ExperimentConfig& c) {
  ordered problem;
  problem["family"] = to_string(c.problem.family);
  problem["dim"] = c.problem.dim;
  problem["n"] = c.problem.n;
  problem["seed"] = c.problem.seed;
  put(problem, "negative_eigenvalue", c.problem.negative_eigenvalue);
  put(problem, "quartic_weight", c.problem.quartic_weight);
  put(problem, "radius", c.problem.radius);
  put(problem, "noise", c.problem.noise);
  put(problem, "curvature_noise", c.problem.curvature_noise);
  put(problem, "regularizer_weight", c.problem.regularizer_weight);

  ordered algorithm;
  algorithm["mode"] = std::string(to_string(c.algorithm.mode));
  algorithm["smoothness_order"] = c.algorithm.smoothness_order;
  algorithm["eps"] = c.algorithm.eps;
  algorithm["eps_H"] = c.algorithm.eps_H;
  if (c.algorithm.sqrt3_step) algorithm["sqrt3_step"] = true;
  put(algorithm, "boost_target", c.algorithm.boost_target);
  if (c.algorithm.overrides.any()) {
    ordered o = ordered::object();
    put(o, "B0", c.algorithm.overrides.B0);
    put(o, "U", c.algorithm.overrides.U);
    put(o, "M", c.algorithm.overrides.M);
    put(o, "eta", c.algorithm.overrides.eta);
    put(o, "B0_check", c.algorithm.overrides.B0_check);
    algorithm["overrides"] = o;
  }

  ordered root;
  root["problem"] = problem;
  root["algorithm"] = algorithm;
  root["trials"] = c.trials;
  root["seed"] = c.seed;
  put(root, "output_dir", c.output_dir);
  return root.dump(2) + "\n";
}

std::shared_ptr<const Problem<double>> build_problem(const ProblemSpec& spec, Mode mode) {
  std::shared_ptr<const FiniteSumProblem<double>> base;
  switch (spec.family) {
    case Family::saddle: {
      SaddleOptions o;
      if (spec.quartic_weight) o.quartic_weight = *spec.quartic_weight;
      if (spec.radius) o.radius = *spec.radius;
      if (spec.noise) o.gradient_noise = *spec.noise;
      if (spec.curvature_noise) o.curvature_noise = *spec.curvature_noise;
      base = make_saddle_problem<double>(spec.dim, spec.n, spec.negative_eigenvalue.value_or(-1.0), spec.seed, o);
      break;
    }
    case Family::regularized: {
      RegularizedOptions o;
      if (spec.regularizer_weight) o.regularizer_weight = *spec.regularizer_weight;
      if (spec.noise) o.label_noise = *spec.noise;
      base = make_regularized_problem<double>(spec.dim, spec.n, spec.seed, o);
      break;
    }
    case Family::quadratic: {
      QuadraticOptions o;
      if (spec.noise) o.gradient_noise = *spec.noise;
      if (spec.curvature_noise) o.hessian_noise = *spec.curvature_noise;
      // Smallest eigenvalue as requested, the rest spread over [0.1, 1].
      Vector<double> eigs(spec.dim);
      for (Index j = 0; j < spec.dim; ++j)
        eigs(j) = spec.dim == 1 ? 1.0 : 0.1 + 0.9 * static_cast<double>(j) / static_cast<double>(spec.dim - 1);
      if (spec.negative_eigenvalue) eigs(0) = *spec.negative_eigenvalue;
      Rng rotation = Rng(spec.seed).split(7);
      base = make_quadratic_problem<double>(random_symmetric_with_spectrum(eigs, rotation), spec.n, spec.seed, o);
      break;
    }
  }
  if (mode == Mode::online) return make_streaming<double>(base);
  return base;
}

DriverConfig<double> build_driver_config(const AlgorithmSpec& spec, const Problem<double>& problem) {
  if (spec.mode == Mode::finite) {
    return spec.smoothness_order == 3 ? config_finite_3rd(problem, spec.eps, spec.eps_H, spec.overrides)
                                      : config_finite_2nd(problem, spec.eps, spec.eps_H, spec.overrides);
  }
  return spec.smoothness_order == 3
             ? config_online_3rd(problem, spec.eps, spec.eps_H, spec.overrides, spec.sqrt3_step)
             : config_online_2nd(problem, spec.eps, spec.eps_H, spec.overrides);
}

}  // namespace snvrg::harness
