#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "pwmd/error.hpp"
#include "toml.hpp"

namespace pwmd::cli {

namespace {

[[noreturn]] void invalid(const std::string& what) { fail(ErrorKind::validation, what); }

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) invalid("'" + path + "' must be a table");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) invalid("unknown key '" + join(path, key) + "'");
}

const json* find(const json& j, const std::string& key) {
  const auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

const json& required(const json& j, const std::string& path, const std::string& key) {
  const json* v = find(j, key);
  if (!v) invalid("missing required field '" + join(path, key) + "'");
  return *v;
}

double as_number(const json& v, const std::string& where) {
  if (!v.is_number()) invalid("'" + where + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) invalid("'" + where + "' must be finite");
  return d;
}

long long as_integer(const json& v, const std::string& where, long long minimum) {
  if (!v.is_number_integer()) invalid("'" + where + "' must be an integer");
  const long long i = v.get<long long>();
  if (i < minimum) invalid("'" + where + "' must be at least " + std::to_string(minimum));
  return i;
}

std::string as_string(const json& v, const std::string& where) {
  if (!v.is_string()) invalid("'" + where + "' must be a string");
  return v.get<std::string>();
}

std::vector<double> as_numbers(const json& v, const std::string& where) {
  if (!v.is_array()) invalid("'" + where + "' must be an array");
  std::vector<double> out;
  for (std::size_t k = 0; k < v.size(); ++k) out.push_back(as_number(v[k], where + "[" + std::to_string(k) + "]"));
  return out;
}

Eigen::MatrixXd as_matrix(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) invalid("'" + where + "' must be a nonempty array of rows");
  const std::size_t rows = v.size();
  const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const std::vector<double> row = as_numbers(v[i], where + "[" + std::to_string(i) + "]");
    if (row.size() != cols) invalid("'" + where + "' rows must have equal length");
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = row[j];
  }
  return m;
}

int model_int(const json& block, const std::string& key, long long minimum) {
  return static_cast<int>(as_integer(required(block, "model", key), "model." + key, minimum));
}

DistSpec model_dist(const json& block, const std::string& key = "dist") {
  const json* d = find(block, key);
  return d ? build_dist(*d, "model." + key) : DistSpec::rademacher();
}

std::uint64_t matrix_seed(const json& block) {
  return static_cast<std::uint64_t>(as_integer(required(block, "model", "matrix_seed"), "model.matrix_seed", 0));
}

const char* kind_names[] = {"tail_ratio", "wasserstein_scaling", "bound_eval", "oracle_check", "verify_suite"};

}  // namespace

const char* to_string(Kind kind) noexcept { return kind_names[static_cast<int>(kind)]; }

DistSpec build_dist(const json& node, const std::string& where) {
  if (node.is_string()) {
    switch (family_from_string(node.get<std::string>())) {
      case Family::rademacher: return DistSpec::rademacher();
      case Family::laplace_unit_var: return DistSpec::laplace_unit_var();
      case Family::gaussian: return DistSpec::gaussian();
      case Family::centered_exponential: return DistSpec::centered_exponential(1.0);
      case Family::uniform_centered: return DistSpec::uniform_centered(1.0);
      case Family::lattice: invalid("'" + where + "': a lattice needs a table with atoms");
    }
  }
  check_keys(node, where, {"family", "rate", "half_width", "atoms"});
  const Family family = family_from_string(as_string(required(node, where, "family"), where + ".family"));
  switch (family) {
    case Family::centered_exponential: {
      const json* r = find(node, "rate");
      return DistSpec::centered_exponential(r ? as_number(*r, where + ".rate") : 1.0);
    }
    case Family::uniform_centered: {
      const json* h = find(node, "half_width");
      return DistSpec::uniform_centered(h ? as_number(*h, where + ".half_width") : 1.0);
    }
    case Family::lattice: {
      const json& atoms = required(node, where, "atoms");
      if (!atoms.is_array()) invalid("'" + where + ".atoms' must be an array of [value, prob] pairs");
      std::vector<Atom> pts;
      for (std::size_t k = 0; k < atoms.size(); ++k) {
        const std::vector<double> pair = as_numbers(atoms[k], where + ".atoms[" + std::to_string(k) + "]");
        if (pair.size() != 2) invalid("'" + where + ".atoms' entries must be [value, prob]");
        pts.push_back({pair[0], pair[1]});
      }
      return DistSpec::lattice(std::move(pts));
    }
    case Family::rademacher: return DistSpec::rademacher();
    case Family::laplace_unit_var: return DistSpec::laplace_unit_var();
    case Family::gaussian: return DistSpec::gaussian();
  }
  invalid("'" + where + "': unsupported family");
}

Model build_model(const json& block, std::optional<int> n_override) {
  if (!block.is_object()) invalid("'model' must be a table");
  const std::string type = as_string(required(block, "model", "type"), "model.type");
  json b = block;
  if (n_override) {
    if (b.contains("n")) invalid("'model.n' must be omitted when grid.n is given");
    b["n"] = *n_override;
  }

  Model model;
  if (type == "iid_sum") {
    check_keys(b, "model", {"type", "n", "dist"});
    model = IidSum{model_int(b, "n", 1), model_dist(b)};
  } else if (type == "multi_iid") {
    check_keys(b, "model", {"type", "n", "d", "dist"});
    model = MultiIid{model_int(b, "n", 1), model_int(b, "d", 1), model_dist(b)};
  } else if (type == "comb_clt") {
    check_keys(b, "model", {"type", "n", "c", "matrix_seed", "sigma2", "noise"});
    CombClt m;
    if (const json* c = find(b, "c")) {
      if (find(b, "matrix_seed")) invalid("'model': give either c or matrix_seed, not both");
      m.c = as_matrix(*c, "model.c");
    } else {
      m.c = random_centered_matrix(model_int(b, "n", 2), matrix_seed(b));
    }
    if (const json* n = find(b, "n"); n && as_integer(*n, "model.n", 2) != m.c.rows())
      invalid("'model.n' does not match the size of model.c");
    const json* s = find(b, "sigma2");
    if (!s)
      m.sigma2 = Eigen::MatrixXd::Zero(m.c.rows(), m.c.cols());
    else if (s->is_number())
      m.sigma2 = Eigen::MatrixXd::Constant(m.c.rows(), m.c.cols(), as_number(*s, "model.sigma2"));
    else
      m.sigma2 = as_matrix(*s, "model.sigma2");
    if (const json* noise = find(b, "noise")) m.noise = build_dist(*noise, "model.noise");
    model = std::move(m);
  } else if (type == "hom_sum") {
    check_keys(b, "model", {"type", "n", "q", "construction", "entries", "matrix_seed", "dist"});
    const std::string how = as_string(required(b, "model", "construction"), "model.construction");
    const int n = model_int(b, "n", 2);
    const DistSpec dist = model_dist(b);
    if (how == "perfect_matching") {
      model = HomSum::perfect_matching(n, dist);
    } else if (how == "random") {
      model = HomSum::from_matrix(GaussChaos2::random(n, matrix_seed(b)).f, dist);
    } else if (how == "entries") {
      const int q = model_int(b, "q", 1);
      const json& e = required(b, "model", "entries");
      if (!e.is_array()) invalid("'model.entries' must be an array of [i_1, ..., i_q, value]");
      std::vector<TensorEntry> entries;
      for (std::size_t k = 0; k < e.size(); ++k) {
        const std::vector<double> row = as_numbers(e[k], "model.entries[" + std::to_string(k) + "]");
        if (row.size() != static_cast<std::size_t>(q + 1)) invalid("'model.entries' rows need q indices and a value");
        TensorEntry t;
        for (int i = 0; i < q; ++i) t.index.push_back(static_cast<int>(row[i]));
        t.value = row[q];
        entries.push_back(std::move(t));
      }
      model = HomSum::from_entries(q, n, std::move(entries), dist);
    } else {
      invalid("'model.construction' must be perfect_matching, random or entries");
    }
  } else if (type == "gauss_chaos2") {
    check_keys(b, "model", {"type", "n", "construction", "matrix_seed"});
    const std::string how = as_string(required(b, "model", "construction"), "model.construction");
    const int n = model_int(b, "n", 2);
    if (how == "perfect_matching") model = GaussChaos2::perfect_matching(n);
    else if (how == "random") model = GaussChaos2::random(n, matrix_seed(b));
    else invalid("'model.construction' must be perfect_matching or random");
  } else if (type == "mdep") {
    check_keys(b, "model", {"type", "n", "m", "kernel", "dist"});
    MDep m{model_int(b, "n", 1), model_int(b, "m", 0), {}, model_dist(b)};
    if (const json* k = find(b, "kernel")) m.kernel = as_numbers(*k, "model.kernel");
    else m.kernel.assign(static_cast<std::size_t>(m.m + 1), 1.0);
    model = std::move(m);
  } else if (type == "graph_dep") {
    check_keys(b, "model", {"type", "n", "edges", "dist"});
    GraphDep g{model_int(b, "n", 1), {}, model_dist(b)};
    if (const json* e = find(b, "edges")) {
      if (!e->is_array()) invalid("'model.edges' must be an array of [i, j] pairs");
      for (std::size_t k = 0; k < e->size(); ++k) {
        const std::vector<double> pair = as_numbers((*e)[k], "model.edges[" + std::to_string(k) + "]");
        if (pair.size() != 2) invalid("'model.edges' entries must be [i, j]");
        g.edges.emplace_back(static_cast<int>(pair[0]), static_cast<int>(pair[1]));
      }
    }
    model = std::move(g);
  } else {
    invalid("unknown model type '" + type + "'");
  }
  validate(model);
  return model;
}

json ExperimentConfig::to_json() const {
  json j;
  j["kind"] = to_string(kind);
  if (!model.is_null()) j["model"] = model;
  json grid = json::object();
  if (!x_grid.empty()) grid["x"] = x_grid;
  if (!n_grid.empty()) grid["n"] = n_grid;
  if (!p_grid.empty()) grid["p"] = p_grid;
  if (!grid.empty()) j["grid"] = grid;
  json est{{"seed", seed}};
  if (kind == Kind::tail_ratio || kind == Kind::wasserstein_scaling || reps > 0) est["reps"] = reps;
  if (kind == Kind::tail_ratio) est["method"] = pwmd::to_string(method);
  if (kind == Kind::wasserstein_scaling) est["p"] = p;
  if (threads > 0) est["threads"] = threads;
  j["estimation"] = est;
  j["output"] = {{"directory", out_dir}, {"formats", formats}};
  if (application) j["bound"] = {{"application", pwmd::to_string(*application)}, {"params", bound_params}};
  if (kind == Kind::verify_suite) {
    json v = json::object();
    if (!filter.empty()) v["filter"] = filter;
    if (!inject_fault.empty()) v["inject_fault"] = inject_fault;
    if (!v.empty()) j["verify"] = v;
  }
  return j;
}

ExperimentConfig parse_config(const json& doc) {
  if (doc.is_object() && doc.contains("manifest_version")) return parse_config(required(doc, "", "config"));
  check_keys(doc, "", {"kind", "model", "grid", "estimation", "output", "bound", "verify"});
  ExperimentConfig cfg;

  const std::string kind = as_string(required(doc, "", "kind"), "kind");
  const auto it = std::find(std::begin(kind_names), std::end(kind_names), kind);
  if (it == std::end(kind_names)) invalid("unknown kind '" + kind + "'");
  cfg.kind = static_cast<Kind>(it - std::begin(kind_names));

  const json empty = json::object();
  const json& est = find(doc, "estimation") ? doc["estimation"] : empty;
  check_keys(est, "estimation", {"reps", "seed", "method", "p", "threads"});
  cfg.seed = static_cast<std::uint64_t>(as_integer(required(est, "estimation", "seed"), "estimation.seed", 0));
  if (const json* t = find(est, "threads")) cfg.threads = static_cast<int>(as_integer(*t, "estimation.threads", 1));
  const bool needs_reps = cfg.kind == Kind::tail_ratio || cfg.kind == Kind::wasserstein_scaling;
  if (needs_reps || find(est, "reps"))
    cfg.reps = static_cast<std::size_t>(as_integer(required(est, "estimation", "reps"), "estimation.reps", 2));
  if (const json* m = find(est, "method")) {
    if (cfg.kind != Kind::tail_ratio) invalid("'estimation.method' only applies to tail_ratio");
    cfg.method = tail_method_from_string(as_string(*m, "estimation.method"));
  }
  if (const json* p = find(est, "p")) {
    if (cfg.kind != Kind::wasserstein_scaling) invalid("'estimation.p' only applies to wasserstein_scaling");
    cfg.p = as_number(*p, "estimation.p");
    if (cfg.p < 1.0) invalid("'estimation.p' must be at least 1");
  }

  const json& grid = find(doc, "grid") ? doc["grid"] : empty;
  check_keys(grid, "grid", {"x", "n", "p"});
  if (const json* x = find(grid, "x")) cfg.x_grid = as_numbers(*x, "grid.x");
  if (const json* n = find(grid, "n")) {
    if (!n->is_array()) invalid("'grid.n' must be an array");
    for (std::size_t k = 0; k < n->size(); ++k)
      cfg.n_grid.push_back(static_cast<int>(as_integer((*n)[k], "grid.n[" + std::to_string(k) + "]", 1)));
  }
  if (const json* p = find(grid, "p")) cfg.p_grid = as_numbers(*p, "grid.p");
  if (!std::is_sorted(cfg.x_grid.begin(), cfg.x_grid.end())) invalid("'grid.x' must be ascending");

  if (const json* out = find(doc, "output")) {
    check_keys(*out, "output", {"directory", "formats"});
    if (const json* d = find(*out, "directory")) cfg.out_dir = as_string(*d, "output.directory");
    if (const json* f = find(*out, "formats")) {
      if (!f->is_array() || f->empty()) invalid("'output.formats' must be a nonempty array");
      cfg.formats.clear();
      for (const json& v : *f) {
        const std::string s = as_string(v, "output.formats");
        if (s != "csv" && s != "json") invalid("'output.formats' entries must be csv or json");
        cfg.formats.push_back(s);
      }
    }
  }

  if (const json* b = find(doc, "bound")) {
    check_keys(*b, "bound", {"application", "params"});
    cfg.application = application_from_string(as_string(required(*b, "bound", "application"), "bound.application"));
    const json& params = required(*b, "bound", "params");
    if (!params.is_object()) invalid("'bound.params' must be a table");
    for (const auto& [key, value] : params.items()) cfg.bound_params[key] = as_number(value, "bound.params." + key);
  }

  if (const json* v = find(doc, "verify")) {
    if (cfg.kind != Kind::verify_suite) invalid("'verify' only applies to verify_suite");
    check_keys(*v, "verify", {"filter", "inject_fault"});
    if (const json* f = find(*v, "filter")) cfg.filter = as_string(*f, "verify.filter");
    if (const json* f = find(*v, "inject_fault")) cfg.inject_fault = as_string(*f, "verify.inject_fault");
  }

  const json* model = find(doc, "model");
  switch (cfg.kind) {
    case Kind::tail_ratio:
      if (cfg.x_grid.empty()) invalid("missing required field 'grid.x'");
      cfg.model = required(doc, "", "model");
      build_model(cfg.model);
      break;
    case Kind::wasserstein_scaling:
      cfg.model = required(doc, "", "model");
      if (cfg.n_grid.empty() == cfg.p_grid.empty()) invalid("wasserstein_scaling needs exactly one of 'grid.n' or 'grid.p'");
      if (cfg.n_grid.size() + cfg.p_grid.size() < 4) invalid("wasserstein_scaling grids need at least 4 points");
      for (double p : cfg.p_grid)
        if (p < 1.0) invalid("'grid.p' entries must be at least 1");
      if (!cfg.n_grid.empty()) build_model(cfg.model, cfg.n_grid.front());
      else build_model(cfg.model);
      break;
    case Kind::bound_eval:
      if (!cfg.application) invalid("missing required field 'bound.application'");
      if (model) invalid("'model' does not apply to bound_eval");
      if (cfg.x_grid.empty()) cfg.x_grid = {0.0};
      app_delta(*cfg.application, cfg.bound_params);
      break;
    case Kind::oracle_check:
      if (cfg.x_grid.empty()) invalid("missing required field 'grid.x'");
      cfg.model = required(doc, "", "model");
      build_model(cfg.model);
      break;
    case Kind::verify_suite:
      if (model) invalid("'model' does not apply to verify_suite");
      break;
  }
  if (cfg.application && cfg.kind != Kind::bound_eval && cfg.kind != Kind::tail_ratio)
    invalid("'bound' only applies to bound_eval and tail_ratio");
  if (cfg.kind != Kind::wasserstein_scaling && (!cfg.n_grid.empty() || !cfg.p_grid.empty()))
    invalid("'grid.n' and 'grid.p' only apply to wasserstein_scaling");
  return cfg;
}

json parse_document(const std::string& text, bool toml) {
  if (!toml) {
    try {
      return json::parse(text);
    } catch (const json::parse_error& e) {
      invalid(std::string("JSON parse error: ") + e.what());
    }
  }
  try {
    const toml::table table = toml::parse(text);
    std::ostringstream os;
    os << toml::json_formatter{table};
    return json::parse(os.str());
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "TOML parse error: " << e.description() << " at line " << e.source().begin.line;
    invalid(os.str());
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) invalid("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const bool is_json = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
  return parse_config(parse_document(ss.str(), !is_json));
}

}  // namespace pwmd::cli
