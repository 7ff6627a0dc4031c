#include "doco/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <sstream>
#include <thread>

#include "doco/random.hpp"

namespace doco {

using nlohmann::json;

bool AgentSpec::operator==(const AgentSpec& o) const {
  auto same = [](const Matrix& a, const Matrix& b) { return a.rows() == b.rows() && a.cols() == b.cols() && a == b; };
  const bool x0_same = x0.has_value() == o.x0.has_value() && (!x0 || same(*x0, *o.x0));
  return same(model.A, o.model.A) && same(model.B, o.model.B) && same(model.C, o.model.C) && x0_same &&
         output_box == o.output_box && cost == o.cost && constraint == o.constraint;
}

bool GraphSpec::operator==(const GraphSpec& o) const {
  return type == o.type && n == o.n && matrix.rows() == o.matrix.rows() && matrix.cols() == o.matrix.cols() &&
         matrix == o.matrix && edge_prob == o.edge_prob && seed == o.seed;
}

Graph GraphSpec::build() const {
  if (type == "ring") return Graph::ring(n);
  if (type == "adjacency") return Graph(matrix);
  if (type == "random-connected") return Graph::random_connected(n, edge_prob, seed);
  throw ValidationError("unknown graph type", "graph.type = " + type);
}

bool ScenarioSpec::operator==(const ScenarioSpec& o) const {
  return name == o.name && seed == o.seed && graph == o.graph && epsilon == o.epsilon && k_mu == o.k_mu &&
         k_y == o.k_y && variant == o.variant && stability_margin == o.stability_margin && agents == o.agents;
}

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

using Term = SinusoidalQuadraticCost::Term;
using Row = SinusoidalAffineConstraint::Row;
using Coef = SinusoidalAffineConstraint::Coefficient;

ScenarioSpec example1() {
  ScenarioSpec s;
  s.name = "example1";
  s.seed = 7;
  s.graph.type = "ring";
  s.graph.n = 6;
  s.epsilon = 0.1;
  s.k_mu = 200.0;

  const Matrix A12 = mat({{1, 0}, {0, 2}}), B12 = mat({{0, 1}, {1, 3}}), C12 = mat({{2, 0}, {0, 1}});
  const Matrix A34 = mat({{0, 2}, {-1, 1}}), B34 = mat({{2, 1}, {1, 0}}), C34 = mat({{2, 1}, {-1, 0}});
  const Matrix A56 = mat({{2, 1, 0}, {0, 1, 1}, {1, 0, 2}}), B56 = Matrix::Identity(3, 3);
  const Matrix C56 = mat({{3, 0, 0}, {0, 1, 0}, {0, 1, 2}});

  const std::vector<std::vector<Term>> costs = {
      {{2, 2, 1, 1}, {2, 1, 1.5, 1.5}},
      {{1, 1, 2, 1}, {2, 2, 1.7, 3}},
      {{3, 1, 2, 3}, {1, 1, 1, 1}},
      {{1, 3, 1, 2}, {3, 1, 2, 2}},
      {{1, 1, 1.5, 1.2}, {1, 3, 1.5, 1}, {2, 1, 2, 3}},
      {{0.5, 1, 2, 1}, {2, 2, 1.2, 1}, {2, 1, 1, 1}},
  };
  const std::vector<Row> rows = {
      {{{1.7, 0.3, 15}, {1.8, 0.2, 10}}, -1, 0, 0},
      {{{1.6, 0.4, 20}, {1.6, 0.4, 20}}, -2, 0, 0},
      {{{1.5, 0.5, 10}, {1.4, 0.6, 25}}, -3, 0, 0},
      {{{1.4, 0.6, 15}, {1.2, 0.8, 15}}, -4, 0, 0},
      {{{1.3, 0.7, 10}, {1.5, 0.5, 10}, {1.7, 0.3, 15}}, -5, 0, 0},
      {{{1.2, 0.8, 15}, {1.4, 0.6, 25}, {1.6, 0.4, 20}}, -6, 0, 0},
  };

  Rng rng(s.seed);
  for (int i = 0; i < 6; ++i) {
    AgentSpec a;
    if (i < 2) a.model = {A12, B12, C12};
    else if (i < 4) a.model = {A34, B34, C34};
    else a.model = {A56, B56, C56};
    const auto n = a.model.states();
    Vector x0(n);
    for (Eigen::Index k = 0; k < n; ++k) x0(k) = rng.uniform(-5.0, 5.0);
    a.x0 = x0;
    a.output_box = Box::uniform(a.model.outputs(), -1.0, 6.0);
    a.cost = costs[static_cast<std::size_t>(i)];
    a.constraint = {rows[static_cast<std::size_t>(i)]};
    s.agents.push_back(std::move(a));
  }
  return s;
}

ScenarioSpec example2() {
  ScenarioSpec s;
  s.name = "example2-pev";
  s.seed = 11;
  s.graph.type = "random-connected";
  s.graph.n = 50;
  s.graph.edge_prob = 0.1;
  s.graph.seed = 12;
  s.epsilon = 1.0;
  s.k_mu = 250.0;
  s.variant.kind = VariantKind::EventTriggered;

  Rng rng(s.seed);
  for (int i = 0; i < s.graph.n; ++i) {
    AgentSpec a;
    a.model = {Matrix::Zero(1, 1), Matrix::Identity(1, 1), Matrix::Identity(1, 1)};
    a.output_box = Box::uniform(1, 0.0, 5.0);
    a.x0 = Vector::Constant(1, rng.uniform(0.0, 5.0));
    // alpha/2 y^2 + beta(t) y = alpha/2 (y + beta(t)/alpha)^2 + const,
    // beta(t) = 0.4 + 0.1 cos(omega t) sweeps [0.3, 0.5].
    const double alpha = rng.uniform(0.5, 1.0);
    const double omega = rng.uniform(0.5, 2.0);
    a.cost = {{alpha / 2.0, -0.1 / alpha, omega, -0.4 / alpha}};
    // y - d(t) <= 0 with d(t) = 0.6 + 0.1 sin(kappa t) sweeping [0.5, 0.7].
    const double kappa = rng.uniform(0.5, 2.0);
    a.constraint = {{{{1.0, 0.0, 0.0}}, -0.6, -0.1, kappa}};
    s.agents.push_back(std::move(a));
  }
  return s;
}

// ---- JSON helpers --------------------------------------------------------

double finite_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ValidationError("expected a number", path);
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ValidationError("non-finite value", path);
  return v;
}

double number_or(const json& j, const char* key, double fallback, const std::string& path) {
  if (!j.contains(key)) return fallback;
  return finite_number(j.at(key), path + "." + key);
}

const json& field(const json& j, const char* key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError("missing field", path + "." + key);
  return j.at(key);
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Matrix matrix_from(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ValidationError("expected a non-empty nested array", path);
  const auto rows = j.size();
  if (!j[0].is_array() || j[0].empty()) throw ValidationError("expected a non-empty nested array", path);
  const auto cols = j[0].size();
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw ValidationError("ragged matrix", path);
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          finite_number(j[r][c], path + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
  }
  return m;
}

json vector_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (std::isfinite(v(k))) a.push_back(v(k));
    else a.push_back(nullptr);
  }
  return a;
}

// `infinite` replaces null entries (unbounded box sides).
Vector vector_from(const json& j, const std::string& path, double infinite = std::numeric_limits<double>::quiet_NaN()) {
  if (!j.is_array()) throw ValidationError("expected an array", path);
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    const std::string p = path + "[" + std::to_string(k) + "]";
    if (j[k].is_null() && !std::isnan(infinite)) v(static_cast<Eigen::Index>(k)) = infinite;
    else v(static_cast<Eigen::Index>(k)) = finite_number(j[k], p);
  }
  return v;
}

json variant_json(const ControllerVariant& v) {
  return {{"type", std::string(to_string(v.kind))},
          {"sigma", v.sigma},
          {"iota", v.iota},
          {"noise_amplitude", v.noise.amplitude}};
}

ControllerVariant variant_from(const json& j, const std::string& path) {
  ControllerVariant v;
  const auto& type = field(j, "type", path);
  if (!type.is_string()) throw ValidationError("expected a string", path + ".type");
  const auto kind = parse_variant(type.get<std::string>());
  if (!kind) throw ValidationError("unknown variant", path + ".type = " + type.get<std::string>());
  v.kind = *kind;
  v.sigma = number_or(j, "sigma", v.sigma, path);
  v.iota = number_or(j, "iota", v.iota, path);
  v.noise.amplitude = number_or(j, "noise_amplitude", 0.0, path);
  return v;
}

std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

json parse_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const auto line = line_of(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ValidationError("parse error", source + ":" + std::to_string(line) + ": " + e.what());
  }
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read file", path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str(), path.string());
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<std::string> builtin_scenario_names() { return {"example1", "example2-pev"}; }

ScenarioSpec builtin_scenario(const std::string& name) {
  if (name == "example1") return example1();
  if (name == "example2-pev") return example2();
  throw ValidationError("unknown scenario", name);
}

json to_json(const ScenarioSpec& spec) {
  json j;
  j["name"] = spec.name;
  j["seed"] = spec.seed;
  json g = {{"type", spec.graph.type}, {"n", spec.graph.n}};
  if (spec.graph.type == "adjacency") {
    json rows = json::array();
    for (Eigen::Index r = 0; r < spec.graph.matrix.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < spec.graph.matrix.cols(); ++c) row.push_back(spec.graph.matrix(r, c));
      rows.push_back(row);
    }
    g["matrix"] = rows;
  }
  if (spec.graph.type == "random-connected") {
    g["edge_prob"] = spec.graph.edge_prob;
    g["seed"] = spec.graph.seed;
  }
  j["graph"] = g;
  j["parameters"] = {{"epsilon", spec.epsilon}, {"k_mu", spec.k_mu}, {"k_y", spec.k_y}};
  j["variant"] = variant_json(spec.variant);
  j["stability_margin"] = spec.stability_margin;
  json agents = json::array();
  for (const auto& a : spec.agents) {
    json aj;
    aj["A"] = matrix_json(a.model.A);
    aj["B"] = matrix_json(a.model.B);
    aj["C"] = matrix_json(a.model.C);
    if (a.x0) aj["x0"] = vector_json(*a.x0);
    aj["output_box"] = {{"lower", vector_json(a.output_box.lower)}, {"upper", vector_json(a.output_box.upper)}};
    json terms = json::array();
    for (const auto& t : a.cost)
      terms.push_back({{"weight", t.weight}, {"amplitude", t.amplitude}, {"frequency", t.frequency}, {"offset", t.offset}});
    aj["cost"] = {{"type", "sinusoidal-quadratic"}, {"terms", terms}};
    json rows = json::array();
    for (const auto& r : a.constraint) {
      json coefs = json::array();
      for (const auto& c : r.coefficients)
        coefs.push_back({{"gain", c.gain}, {"amplitude", c.amplitude}, {"frequency", c.frequency}});
      rows.push_back({{"coefficients", coefs},
                      {"offset", r.offset},
                      {"offset_amplitude", r.offset_amplitude},
                      {"offset_frequency", r.offset_frequency}});
    }
    aj["constraint"] = {{"type", "sinusoidal-affine"}, {"rows", rows}};
    agents.push_back(aj);
  }
  j["agents"] = agents;
  return j;
}

ScenarioSpec scenario_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("expected an object", "scenario");
  ScenarioSpec s;
  const auto& name = field(j, "name", "scenario");
  if (!name.is_string()) throw ValidationError("expected a string", "scenario.name");
  s.name = name.get<std::string>();
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ValidationError("expected a nonnegative integer", "scenario.seed");
    s.seed = j["seed"].get<std::uint64_t>();
  }

  const auto& g = field(j, "graph", "scenario");
  const auto& gtype = field(g, "type", "scenario.graph");
  if (!gtype.is_string()) throw ValidationError("expected a string", "scenario.graph.type");
  s.graph.type = gtype.get<std::string>();
  if (g.contains("n")) {
    if (!g["n"].is_number_integer()) throw ValidationError("expected an integer", "scenario.graph.n");
    s.graph.n = g["n"].get<int>();
  }
  if (s.graph.type == "adjacency") {
    const Matrix m = matrix_from(field(g, "matrix", "scenario.graph"), "scenario.graph.matrix");
    s.graph.matrix = m.cast<int>();
    if ((s.graph.matrix.cast<double>() - m).cwiseAbs().maxCoeff() > 0.0)
      throw ValidationError("weighted graph", "scenario.graph.matrix has non-integer entries");
    if (!g.contains("n")) s.graph.n = static_cast<int>(m.rows());
  } else if (s.graph.type == "random-connected") {
    s.graph.edge_prob = number_or(g, "edge_prob", s.graph.edge_prob, "scenario.graph");
    if (g.contains("seed")) {
      if (!g["seed"].is_number_unsigned()) throw ValidationError("expected a nonnegative integer", "scenario.graph.seed");
      s.graph.seed = g["seed"].get<std::uint64_t>();
    }
  } else if (s.graph.type != "ring") {
    throw ValidationError("unknown graph type", "scenario.graph.type = " + s.graph.type);
  }

  if (j.contains("parameters")) {
    const auto& p = j["parameters"];
    s.epsilon = number_or(p, "epsilon", s.epsilon, "scenario.parameters");
    s.k_mu = number_or(p, "k_mu", s.k_mu, "scenario.parameters");
    s.k_y = number_or(p, "k_y", s.k_y, "scenario.parameters");
  }
  if (j.contains("variant")) s.variant = variant_from(j["variant"], "scenario.variant");
  s.stability_margin = number_or(j, "stability_margin", s.stability_margin, "scenario");

  const auto& agents = field(j, "agents", "scenario");
  if (!agents.is_array() || agents.empty()) throw ValidationError("expected a non-empty array", "scenario.agents");
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const std::string path = "scenario.agents[" + std::to_string(i) + "]";
    const auto& aj = agents[i];
    AgentSpec a;
    a.model.A = matrix_from(field(aj, "A", path), path + ".A");
    a.model.B = matrix_from(field(aj, "B", path), path + ".B");
    a.model.C = matrix_from(field(aj, "C", path), path + ".C");
    if (aj.contains("x0")) a.x0 = vector_from(aj["x0"], path + ".x0");
    const auto& box = field(aj, "output_box", path);
    const Vector lo = vector_from(field(box, "lower", path + ".output_box"), path + ".output_box.lower",
                                  -std::numeric_limits<double>::infinity());
    const Vector hi = vector_from(field(box, "upper", path + ".output_box"), path + ".output_box.upper",
                                  std::numeric_limits<double>::infinity());
    try {
      a.output_box = Box(lo, hi);
    } catch (const std::invalid_argument& e) {
      throw ValidationError("invalid output box", path + ".output_box: " + e.what());
    }

    const auto& cost = field(aj, "cost", path);
    const auto& ctype = field(cost, "type", path + ".cost");
    if (ctype != "sinusoidal-quadratic") throw ValidationError("unknown cost type", path + ".cost.type");
    const auto& terms = field(cost, "terms", path + ".cost");
    if (!terms.is_array()) throw ValidationError("expected an array", path + ".cost.terms");
    for (std::size_t k = 0; k < terms.size(); ++k) {
      const std::string tp = path + ".cost.terms[" + std::to_string(k) + "]";
      Term t;
      t.weight = finite_number(field(terms[k], "weight", tp), tp + ".weight");
      t.amplitude = number_or(terms[k], "amplitude", 0.0, tp);
      t.frequency = number_or(terms[k], "frequency", 0.0, tp);
      t.offset = number_or(terms[k], "offset", 0.0, tp);
      a.cost.push_back(t);
    }

    const auto& con = field(aj, "constraint", path);
    const auto& gtype2 = field(con, "type", path + ".constraint");
    if (gtype2 != "sinusoidal-affine") throw ValidationError("unknown constraint type", path + ".constraint.type");
    const auto& rows = field(con, "rows", path + ".constraint");
    if (!rows.is_array()) throw ValidationError("expected an array", path + ".constraint.rows");
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::string rp = path + ".constraint.rows[" + std::to_string(r) + "]";
      Row row;
      const auto& coefs = field(rows[r], "coefficients", rp);
      if (!coefs.is_array()) throw ValidationError("expected an array", rp + ".coefficients");
      for (std::size_t k = 0; k < coefs.size(); ++k) {
        const std::string cp = rp + ".coefficients[" + std::to_string(k) + "]";
        Coef c;
        c.gain = number_or(coefs[k], "gain", 0.0, cp);
        c.amplitude = number_or(coefs[k], "amplitude", 0.0, cp);
        c.frequency = number_or(coefs[k], "frequency", 0.0, cp);
        row.coefficients.push_back(c);
      }
      row.offset = number_or(rows[r], "offset", 0.0, rp);
      row.offset_amplitude = number_or(rows[r], "offset_amplitude", 0.0, rp);
      row.offset_frequency = number_or(rows[r], "offset_frequency", 0.0, rp);
      a.constraint.push_back(std::move(row));
    }
    s.agents.push_back(std::move(a));
  }
  if (!j["graph"].contains("n")) s.graph.n = static_cast<int>(s.agents.size());
  return s;
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
  ScenarioSpec s = scenario_from_json(read_json_file(path));
  validate_scenario(s);
  return s;
}

ScenarioSpec resolve_scenario(const std::string& name_or_path) {
  const auto names = builtin_scenario_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end()) return builtin_scenario(name_or_path);
  return load_scenario(name_or_path);
}

void save_scenario(const ScenarioSpec& spec, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write file", path.string());
  out << to_json(spec).dump(2) << '\n';
}

std::vector<LocalProblem> build_problems(const ScenarioSpec& spec) {
  std::vector<LocalProblem> problems;
  for (const auto& a : spec.agents)
    problems.emplace_back(std::make_shared<SinusoidalQuadraticCost>(a.cost),
                          std::make_shared<SinusoidalAffineConstraint>(a.constraint, a.model.outputs()),
                          a.output_box);
  return problems;
}

namespace {

void check_agent_shapes(const ScenarioSpec& spec) {
  if (spec.agents.empty()) throw ValidationError("no agents", "scenario.agents");
  const auto q = spec.agents.front().constraint.size();
  for (std::size_t i = 0; i < spec.agents.size(); ++i) {
    const auto& a = spec.agents[i];
    const std::string path = "agents[" + std::to_string(i) + "]";
    try {
      a.model.check_dimensions();
    } catch (const StructuralError& e) {
      throw ValidationError("model shape", path + ": " + e.what());
    }
    const auto p = a.model.outputs();
    if (!a.model.A.allFinite() || !a.model.B.allFinite() || !a.model.C.allFinite())
      throw ValidationError("non-finite value", path + " model");
    if (a.x0 && (a.x0->size() != a.model.states() || !a.x0->allFinite()))
      throw ValidationError("initial state shape", path + ".x0");
    if (a.output_box.dim() != p) throw ValidationError("output box dimension", path + ".output_box");
    if (static_cast<Eigen::Index>(a.cost.size()) != p) throw ValidationError("cost dimension", path + ".cost");
    for (const auto& t : a.cost)
      if (!(t.weight > 0.0)) throw ValidationError("cost weight must be positive", path + ".cost");
    if (a.constraint.size() != q || q == 0) throw ValidationError("constraint dimension", path + ".constraint");
    for (const auto& r : a.constraint)
      if (static_cast<Eigen::Index>(r.coefficients.size()) != p)
        throw ValidationError("constraint dimension", path + ".constraint coefficients");
  }
}

Graph checked_graph(const ScenarioSpec& spec) {
  if (spec.graph.n != static_cast<int>(spec.agents.size()))
    throw ValidationError("graph size", "graph.n = " + std::to_string(spec.graph.n) + " but " +
                                            std::to_string(spec.agents.size()) + " agents");
  Graph g = spec.graph.build();
  if (g.size() != spec.graph.n) throw ValidationError("graph size", "adjacency size differs from graph.n");
  if (!is_connected(g)) throw ValidationError("graph not connected", "graph");
  return g;
}

std::vector<Gains> checked_gains(const ScenarioSpec& spec) {
  std::vector<Gains> gains;
  for (std::size_t i = 0; i < spec.agents.size(); ++i) {
    const auto& m = spec.agents[i].model;
    const std::string who = "agent " + std::to_string(i + 1);
    if (!check_rank_condition(m)) throw ValidationError("rank condition violated", who);
    try {
      gains.push_back(synthesize_gains(m, spec.stability_margin));
    } catch (const SynthesisError& e) {
      throw ValidationError("gain synthesis failed", who + ": " + e.what());
    } catch (const NumericalError& e) {
      throw ValidationError("gain synthesis failed", who + ": " + e.what());
    }
  }
  return gains;
}

Network assemble(const ScenarioSpec& spec, Graph graph, std::vector<Gains> gains) {
  Network net;
  net.graph = std::move(graph);
  net.gains = std::move(gains);
  net.problems = build_problems(spec);
  Rng rng(spec.seed);
  for (const auto& a : spec.agents) {
    net.models.push_back(a.model);
    if (a.x0) {
      net.initial_state.push_back(*a.x0);
    } else {
      Vector x0(a.model.states());
      for (Eigen::Index k = 0; k < x0.size(); ++k) x0(k) = rng.uniform(-5.0, 5.0);
      net.initial_state.push_back(x0);
    }
  }
  net.check();
  return net;
}

}  // namespace

void validate_scenario(const ScenarioSpec& spec) {
  check_agent_shapes(spec);
  if (!std::isfinite(spec.epsilon) || !(spec.epsilon > 0.0)) throw ValidationError("epsilon must be positive", "parameters.epsilon");
  if (!(spec.stability_margin > 0.0)) throw ValidationError("stability margin must be positive", "stability_margin");
  spec.variant.validate();
  if (spec.variant.kind == VariantKind::ContinuousConsensus)
    for (const auto& a : spec.agents)
      if (a.model.outputs() != spec.agents.front().model.outputs())
        throw ValidationError("identical outputs need equal output dimensions", "agents");
  const Graph g = checked_graph(spec);
  checked_gains(spec);
  const auto problems = build_problems(spec);
  const auto constants = problem_constants(problems);
  GlobalParameters params;
  params.epsilon = spec.epsilon;
  params.k_mu = spec.k_mu;
  params.k_y = spec.k_y;
  params.agents = g.size();
  params.constraint_dim = problems.front().constraint_dim();
  const auto report = validate_gain_conditions(params, spec.variant, constants);
  if (const auto* f = report.first_failure()) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "value %.6g, required %.6g", f->value, f->required);
    throw ValidationError(f->rule, buf);
  }
}

Network build_network(const ScenarioSpec& spec) {
  check_agent_shapes(spec);
  Graph g = checked_graph(spec);
  return assemble(spec, std::move(g), checked_gains(spec));
}

SimConfig default_config(const ScenarioSpec& spec) {
  SimConfig c;
  c.epsilon = spec.epsilon;
  c.k_mu = spec.k_mu;
  c.k_y = spec.k_y;
  c.variant = spec.variant;
  c.seed = spec.seed;
  return c;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const ScenarioSpec& spec, const SimConfig& c) {
  json j;
  j["scenario"] = to_json(spec);
  j["config"] = {{"dt", c.dt},
                 {"T", c.horizon},
                 {"epsilon", c.epsilon},
                 {"k_mu", c.k_mu},
                 {"k_y", c.k_y},
                 {"variant", variant_json(c.variant)},
                 {"seed", c.seed},
                 {"log_stride", c.log_stride},
                 {"checkpoint_interval", c.checkpoint_interval}};
  return fnv1a_hex(j.dump());
}

void write_trajectory_csv(std::ostream& os, const Network& net, const Trajectory& traj,
                          const MetricsReport& report) {
  const auto q = net.constraint_dim();
  os << "time";
  for (int i = 0; i < net.agents(); ++i)
    for (Eigen::Index k = 0; k < net.models[static_cast<std::size_t>(i)].outputs(); ++k)
      os << ",y_" << i + 1 << '_' << k + 1;
  for (int i = 0; i < net.agents(); ++i)
    for (Eigen::Index k = 0; k < q; ++k) os << ",mu_" << i + 1 << '_' << k + 1;
  os << ",cost_integral";
  for (Eigen::Index j = 0; j < q; ++j) os << ",constraint_integral_" << j + 1;
  os << ",regret_running,fit_running,events_total\n";
  for (std::size_t s = 0; s < traj.samples(); ++s) {
    os << fmt(traj.times[s]);
    for (const auto& y : traj.y[s])
      for (Eigen::Index k = 0; k < y.size(); ++k) os << ',' << fmt(y(k));
    for (const auto& mu : traj.mu[s])
      for (Eigen::Index k = 0; k < mu.size(); ++k) os << ',' << fmt(mu(k));
    os << ',' << fmt(traj.cost_integral[s]);
    for (Eigen::Index j = 0; j < q; ++j) os << ',' << fmt(traj.constraint_integral[s](j));
    os << ',' << fmt(report.regret_running[s]) << ',' << fmt(report.fit_running[s]) << ',' << traj.events_total[s]
       << '\n';
  }
}

void write_metrics_csv(std::ostream& os, const MetricsReport& report) {
  const auto q = report.checkpoints.empty() ? 0 : report.checkpoints.front().fit.parts.size();
  const auto n_ind = report.checkpoints.empty() ? 0 : report.checkpoints.front().individual_regret.size();
  os << "T,regret,fit";
  for (Eigen::Index j = 0; j < q; ++j) os << ",F_" << j + 1;
  os << ",regret_bound,fit_bound,regret_ok,fit_ok,certified,on_expectation,regret_over_T,fit_over_sqrt_T,"
        "fit_over_T,events_total,oracle_residual";
  for (std::size_t i = 0; i < n_ind; ++i) os << ",individual_regret_" << i + 1;
  os << '\n';
  for (const auto& c : report.checkpoints) {
    os << fmt(c.time) << ',' << fmt(c.regret) << ',' << fmt(c.fit.fit);
    for (Eigen::Index j = 0; j < q; ++j) os << ',' << fmt(c.fit.parts(j));
    os << ',' << fmt(c.bounds.regret) << ',' << fmt(c.bounds.fit) << ',' << c.regret_ok << ',' << c.fit_ok << ','
       << c.bounds.certified << ',' << c.bounds.on_expectation << ',' << fmt(c.regret / c.time) << ','
       << fmt(c.fit.fit / std::sqrt(c.time)) << ',' << fmt(c.fit.fit / c.time) << ',' << c.events_total << ','
       << fmt(c.oracle_residual);
    for (double r : c.individual_regret) os << ',' << fmt(r);
    os << '\n';
  }
}

json bound_report(const MetricsReport& r, const SimConfig& config) {
  json j;
  j["variant"] = std::string(to_string(config.variant.kind));
  j["bounds_hold"] = r.bounds_hold();
  j["certified"] = r.gains.certified() && !r.certificate.certificate.ill_conditioned;
  j["on_expectation"] = config.variant.kind == VariantKind::Noisy;
  json conds = json::array();
  for (const auto& c : r.gains.conditions)
    conds.push_back({{"rule", c.rule}, {"value", c.value}, {"required", c.required}, {"passed", c.passed}});
  j["gain_conditions"] = conds;
  j["certificate"] = {{"varsigma1", r.certificate.certificate.varsigma1},
                      {"varsigma2", r.certificate.certificate.varsigma2},
                      {"energy", r.certificate.energy},
                      {"separation", r.certificate.certificate.separation},
                      {"ill_conditioned", r.certificate.certificate.ill_conditioned}};
  json ev = {{"total", r.events.total}, {"per_agent", r.events.per_agent}};
  ev["min_inter_event"] = std::isfinite(r.events.min_inter_event) ? json(r.events.min_inter_event) : json(nullptr);
  ev["zeno_lower_bound"] = r.events.zeno_lower_bound;
  j["events"] = ev;
  if (!r.horizon_optimum.y_star.empty())
    j["offline_optimum"] = {{"y_star", vector_json(r.horizon_optimum.stacked())},
                            {"kkt_residual", r.horizon_optimum.kkt_residual},
                            {"feasibility_margin", r.horizon_optimum.feasibility_margin},
                            {"objective", r.horizon_optimum.objective}};
  json cps = json::array();
  for (const auto& c : r.checkpoints)
    cps.push_back({{"T", c.time},
                   {"regret", c.regret},
                   {"regret_bound", c.bounds.regret},
                   {"regret_ok", c.regret_ok},
                   {"fit", c.fit.fit},
                   {"fit_bound", c.bounds.fit},
                   {"fit_ok", c.fit_ok}});
  j["checkpoints"] = cps;
  return j;
}

RunArtifacts run_to_directory(const ScenarioSpec& spec, const Network& net, const SimConfig& config,
                              const std::filesystem::path& dir, int grid_k) {
  RunArtifacts art;
  art.config_hash = config_hash(spec, config);
  art.trajectory = run(net, config);
  art.trajectory.config_hash = art.config_hash;
  MetricsOptions mo;
  mo.checkpoint_interval = config.checkpoint_interval;
  mo.grid_k = grid_k;
  mo.cache_key = fnv1a_hex(to_json(spec).dump());
  art.report = evaluate(net, config, art.trajectory, mo);

  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "trajectory.csv");
    write_trajectory_csv(out, net, art.trajectory, art.report);
  }
  {
    std::ofstream out(dir / "metrics.csv");
    write_metrics_csv(out, art.report);
  }
  {
    json rep = bound_report(art.report, config);
    rep["config_hash"] = art.config_hash;
    rep["seed"] = config.seed;
    std::ofstream out(dir / "report.json");
    out << rep.dump(2) << '\n';
  }
  return art;
}

void ExperimentPlan::validate() const {
  if (scenario.empty()) throw ValidationError("missing scenario", "plan.scenario");
  if (sigma.empty() || iota.empty() || seed_count < 1) throw ValidationError("empty sweep grid", "plan.sweep");
  if (!(horizon > 0.0)) throw ValidationError("T must be positive", "plan.T");
  if (!(dt > 0.0)) throw ValidationError("dt must be positive", "plan.dt");
  if (grid_k < 2) throw ValidationError("grid_k must be >= 2", "plan.grid_k");
}

ExperimentPlan plan_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("expected an object", "plan");
  ExperimentPlan p;
  const auto& sc = field(j, "scenario", "plan");
  if (!sc.is_string()) throw ValidationError("expected a string", "plan.scenario");
  p.scenario = sc.get<std::string>();
  if (j.contains("output_dir")) p.output_dir = j["output_dir"].get<std::string>();
  if (j.contains("variant")) {
    const auto kind = parse_variant(j["variant"].get<std::string>());
    if (!kind) throw ValidationError("unknown variant", "plan.variant");
    p.variant = *kind;
  }
  p.horizon = number_or(j, "T", p.horizon, "plan");
  p.dt = number_or(j, "dt", p.dt, "plan");
  if (j.contains("epsilon")) p.epsilon = finite_number(j["epsilon"], "plan.epsilon");
  if (j.contains("k_mu")) p.k_mu = finite_number(j["k_mu"], "plan.k_mu");
  if (j.contains("noise_amplitude")) p.noise_amplitude = finite_number(j["noise_amplitude"], "plan.noise_amplitude");
  if (j.contains("sweep")) {
    const auto& sw = j["sweep"];
    if (sw.contains("sigma")) {
      const Vector v = vector_from(sw["sigma"], "plan.sweep.sigma");
      p.sigma.assign(v.data(), v.data() + v.size());
    }
    if (sw.contains("iota")) {
      const Vector v = vector_from(sw["iota"], "plan.sweep.iota");
      p.iota.assign(v.data(), v.data() + v.size());
    }
  }
  if (j.contains("seeds")) {
    const auto& s = j["seeds"];
    if (s.contains("first")) p.first_seed = s["first"].get<std::uint64_t>();
    if (s.contains("count")) p.seed_count = s["count"].get<int>();
  }
  p.checkpoint_interval = number_or(j, "checkpoint_interval", p.checkpoint_interval, "plan");
  if (j.contains("log_stride")) p.log_stride = j["log_stride"].get<long>();
  if (j.contains("grid_k")) p.grid_k = j["grid_k"].get<int>();
  if (j.contains("illustrative")) p.illustrative = j["illustrative"].get<bool>();
  p.validate();
  return p;
}

ExperimentPlan load_plan(const std::filesystem::path& path) {
  try {
    return plan_from_json(read_json_file(path));
  } catch (const json::exception& e) {
    throw ValidationError("invalid plan", path.string() + ": " + e.what());
  }
}

ExperimentResult run_experiment(const ExperimentPlan& plan) {
  plan.validate();
  const ScenarioSpec spec = resolve_scenario(plan.scenario);
  const Network net = build_network(spec);

  struct Job {
    std::size_t point;
    double sigma, iota;
    std::uint64_t seed;
    std::string run_id;
  };
  std::vector<Job> jobs;
  const bool triggered = plan.variant == VariantKind::EventTriggered;
  const auto& sigmas = triggered ? plan.sigma : std::vector<double>{plan.sigma.front()};
  const auto& iotas = triggered ? plan.iota : std::vector<double>{plan.iota.front()};
  std::size_t point = 0;
  for (double s : sigmas)
    for (double i : iotas) {
      for (int k = 0; k < plan.seed_count; ++k) {
        char id[32];
        std::snprintf(id, sizeof id, "run_%03zu", jobs.size());
        jobs.push_back({point, s, i, plan.first_seed + static_cast<std::uint64_t>(k), id});
      }
      ++point;
    }

  auto execute = [&](const Job& job) {
    RunRecord rec;
    rec.run_id = job.run_id;
    rec.sigma = job.sigma;
    rec.iota = job.iota;
    rec.seed = job.seed;
    SimConfig c = default_config(spec);
    c.horizon = plan.horizon;
    c.dt = plan.dt;
    c.log_stride = plan.log_stride;
    c.checkpoint_interval = plan.checkpoint_interval;
    c.variant.kind = plan.variant;
    c.variant.sigma = job.sigma;
    c.variant.iota = job.iota;
    if (plan.epsilon) c.epsilon = *plan.epsilon;
    if (plan.k_mu) c.k_mu = *plan.k_mu;
    if (plan.noise_amplitude) c.variant.noise.amplitude = *plan.noise_amplitude;
    c.seed = job.seed;
    rec.config_hash = config_hash(spec, c);
    try {
      const auto art = run_to_directory(spec, net, c, plan.output_dir / job.run_id, plan.grid_k);
      const auto& last = art.report.checkpoints.back();
      rec.status = "ok";
      rec.regret = last.regret;
      rec.fit = last.fit.fit;
      rec.fit_parts = last.fit.parts.cwiseMax(0.0);
      rec.events_total = art.report.events.total;
      rec.bounds_hold = art.report.bounds_hold();
    } catch (const DivergenceError&) {
      rec.status = "diverged";
    } catch (const OracleError&) {
      rec.status = "oracle-failed";
    }
    return rec;
  };

  ExperimentResult result;
  result.runs.resize(jobs.size());
  const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  for (std::size_t start = 0; start < jobs.size(); start += workers) {
    std::vector<std::future<RunRecord>> batch;
    for (std::size_t k = start; k < std::min(jobs.size(), start + workers); ++k)
      batch.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred, execute, jobs[k]));
    for (std::size_t k = 0; k < batch.size(); ++k) result.runs[start + k] = batch[k].get();
  }

  if (plan.seed_count > 1) {
    for (std::size_t p = 0; p < point; ++p) {
      RunRecord mean;
      mean.run_id = "mean_" + std::to_string(p);
      mean.status = "mean";
      int ok = 0;
      Vector parts;
      for (std::size_t k = 0; k < jobs.size(); ++k) {
        if (jobs[k].point != p) continue;
        mean.sigma = jobs[k].sigma;
        mean.iota = jobs[k].iota;
        const auto& r = result.runs[k];
        if (r.status != "ok") continue;
        ++ok;
        mean.regret += r.regret;
        mean.events_total += r.events_total;
        if (parts.size() == 0) parts = Vector::Zero(r.fit_parts.size());
        parts += r.fit_parts;
      }
      if (ok > 0) {
        mean.regret /= ok;
        mean.events_total /= ok;
        mean.fit = (parts / ok).norm();
        mean.fit_parts = parts / ok;
      }
      result.means.push_back(mean);
    }
  }

  std::filesystem::create_directories(plan.output_dir);
  std::ofstream index(plan.output_dir / "index.csv");
  index << "run_id,scenario,variant,sigma,iota,seed,config_hash,status,regret,fit,events_total,bounds_hold,"
           "illustrative\n";
  auto row = [&](const RunRecord& r, bool with_seed) {
    index << r.run_id << ',' << spec.name << ',' << to_string(plan.variant) << ',' << fmt(r.sigma) << ','
          << fmt(r.iota) << ',' << (with_seed ? std::to_string(r.seed) : std::string()) << ',' << r.config_hash
          << ',' << r.status << ',' << fmt(r.regret) << ',' << fmt(r.fit) << ',' << r.events_total << ','
          << r.bounds_hold << ',' << plan.illustrative << '\n';
  };
  for (const auto& r : result.runs) row(r, true);
  for (const auto& r : result.means) row(r, false);
  return result;
}

}  // namespace doco
