#include "ratchet/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "json.hpp"

namespace ratchet {

using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += "\n  " + s;
  return out;
}

// Reads typed fields from one JSON object, recording problems instead of
// stopping at the first one, and flags keys that were never read.
class Reader {
 public:
  Reader(const json& obj, std::string path, std::vector<std::string>& problems)
      : obj_(obj), path_(std::move(path)), problems_(problems) {
    if (!obj_.is_object()) problem(path_, "must be an object");
  }
  ~Reader() {
    if (!obj_.is_object()) return;
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.count(key)) problem(key_path(key), "unknown key");
    }
  }

  bool has(const std::string& key) const { return obj_.is_object() && obj_.contains(key); }

  void number(const std::string& key, double& out, const std::function<bool(double)>& ok = {},
              const char* requirement = nullptr) {
    const json* v = fetch(key);
    if (!v) return;
    if (!v->is_number()) return problem(key_path(key), "must be a number");
    const double x = v->get<double>();
    if (!std::isfinite(x)) return problem(key_path(key), "must be finite");
    if (ok && !ok(x)) return problem(key_path(key), requirement);
    out = x;
  }

  template <typename Int>
  void integer(const std::string& key, Int& out, const std::function<bool(long long)>& ok = {},
               const char* requirement = nullptr) {
    const json* v = fetch(key);
    if (!v) return;
    if (!v->is_number_integer()) return problem(key_path(key), "must be an integer");
    const long long x = v->get<long long>();
    if (ok && !ok(x)) return problem(key_path(key), requirement);
    out = static_cast<Int>(x);
  }

  void boolean(const std::string& key, bool& out) {
    const json* v = fetch(key);
    if (!v) return;
    if (!v->is_boolean()) return problem(key_path(key), "must be true or false");
    out = v->get<bool>();
  }

  void text(const std::string& key, std::string& out, const std::set<std::string>& allowed) {
    const json* v = fetch(key);
    if (!v) return;
    if (!v->is_string()) return problem(key_path(key), "must be a string");
    const std::string s = v->get<std::string>();
    if (!allowed.empty() && !allowed.count(s)) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      return problem(key_path(key), "must be one of " + list);
    }
    out = s;
  }

  // Nested object; returns nullptr when absent.
  const json* object(const std::string& key) { return fetch(key); }
  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  void problem(const std::string& where, const std::string& what) { problems_.push_back(where + ": " + what); }

 private:
  const json* fetch(const std::string& key) {
    seen_.insert(key);
    if (!obj_.is_object() || !obj_.contains(key)) return nullptr;
    return &obj_.at(key);
  }

  const json& obj_;
  std::string path_;
  std::vector<std::string>& problems_;
  std::set<std::string> seen_;
};

const auto positive = [](double x) { return x > 0.0; };
const auto nonnegative = [](double x) { return x >= 0.0; };

void read_grid(const json& j, const std::string& path, GridSpec& out, std::vector<std::string>& problems) {
  if (j.is_array()) {
    if (j.empty()) problems.push_back(path + ": grid must not be empty");
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (!j[i].is_number() || !std::isfinite(j[i].get<double>())) {
        problems.push_back(path + "[" + std::to_string(i) + "]: must be a finite number");
      } else {
        out.values.push_back(j[i].get<double>());
      }
    }
    return;
  }
  Reader r(j, path, problems);
  if (!j.is_object()) return;
  if (r.has("periodic")) {
    r.integer("periodic", out.periodic, [](long long n) { return n >= 1; }, "must be at least 1");
    return;
  }
  double start = 0.0, stop = 0.0;
  if (!r.has("start")) r.problem(r.key_path("start"), "required (or give a list or periodic)");
  if (!r.has("stop")) r.problem(r.key_path("stop"), "required (or give a list or periodic)");
  if (!r.has("count")) r.problem(r.key_path("count"), "required (or give a list or periodic)");
  r.number("start", start);
  r.number("stop", stop);
  r.integer("count", out.count, [](long long n) { return n >= 1; }, "must be at least 1");
  out.start = start;
  out.stop = stop;
}

void read_selector(const json& j, const std::string& path, StateSelector& out, std::vector<std::string>& problems) {
  Reader r(j, path, problems);
  if (r.has("band")) {
    int band = 0;
    r.integer("band", band, [](long long b) { return b >= 0; }, "must be a nonnegative index");
    out.band = band;
  }
  r.text("kind", out.kind, {"chaotic_layer", "transporting"});
  r.number("near_quasienergy", out.near_quasienergy, [](double x) { return x > -kPi - 1e-12 && x <= kPi; },
           "must lie in (-pi, pi]");
  r.number("window", out.window, positive, "must be positive");
  if (j.is_object() && !out.band && out.kind.empty()) r.problem(path, "needs either band or kind");
  if (j.is_object() && out.band && !out.kind.empty()) r.problem(path, "band and kind are mutually exclusive");
}

json grid_json(const GridSpec& g) {
  if (!g.values.empty()) return g.values;
  if (g.periodic > 0) return {{"periodic", g.periodic}};
  if (g.start) return {{"start", *g.start}, {"stop", *g.stop}, {"count", g.count}};
  return json::array();
}

bool is_set(const GridSpec& g) { return !g.values.empty() || g.periodic > 0 || g.start.has_value(); }
bool is_set(const StateSelector& s) { return s.band.has_value() || !s.kind.empty(); }

json selector_json(const StateSelector& s) {
  json j;
  if (s.band) j["band"] = *s.band;
  if (!s.kind.empty()) {
    j["kind"] = s.kind;
    j["near_quasienergy"] = s.near_quasienergy;
    j["window"] = s.window;
  }
  return j;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error("invalid config:" + join(problems)), problems_(std::move(problems)) {}

std::vector<double> GridSpec::resolve(double period) const {
  if (!values.empty()) return values;
  std::vector<double> out;
  if (periodic > 0) {
    for (int k = 0; k < periodic; ++k) out.push_back(period * k / periodic);
  } else if (start && count > 0) {
    for (int k = 0; k < count; ++k) {
      out.push_back(count == 1 ? *start : *start + (*stop - *start) * k / (count - 1));
    }
  }
  return out;
}

RunConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("config: not valid JSON (") + e.what() + ")"});
  }
  RunConfig c;
  std::vector<std::string> problems;
  {
    Reader top(doc, "", problems);
    if (const json* m = top.object("model")) {
      Reader r(*m, "model", problems);
      r.number("mu", c.model.mu, positive, "must be positive");
      r.number("v0", c.model.v0);
      r.number("g", c.model.g);
      r.integer("n_max", c.model.n_max, [](long long n) { return n >= 1 && n <= 512; }, "must be in [1, 512]");
      r.number("dt", c.model.dt, nonnegative, "must be >= 0 (0 selects T / 1024)");
    }
    if (const json* f = top.object("field")) {
      Reader r(*f, "field", problems);
      r.number("e1", c.field.e1);
      r.number("e2", c.field.e2);
      r.number("omega", c.field.omega, positive, "must be positive");
      r.number("theta", c.field.theta);
      r.number("t0", c.field.t0);
    }
    if (const json* s = top.object("floquet_spectrum")) {
      Reader r(*s, "floquet_spectrum", problems);
      if (const json* g = r.object("theta_grid")) read_grid(*g, "floquet_spectrum.theta_grid", c.floquet_spectrum.theta_grid, problems);
      r.number("t0", c.floquet_spectrum.t0);
      r.boolean("dump_states", c.floquet_spectrum.dump_states);
    }
    if (const json* s = top.object("continue")) {
      Reader r(*s, "continue", problems);
      r.number("theta", c.continuation.theta);
      r.number("t0", c.continuation.t0);
      if (const json* sel = r.object("seed")) read_selector(*sel, "continue.seed", c.continuation.seed, problems);
      if (const json* sel = r.object("partner")) {
        StateSelector partner;
        read_selector(*sel, "continue.partner", partner, problems);
        c.continuation.partner = partner;
      }
      r.number("g_max", c.continuation.g_max, nonnegative, "must be >= 0");
      r.number("dg", c.continuation.dg, positive, "must be positive");
    }
    if (const json* s = top.object("current_scan")) {
      Reader r(*s, "current_scan", problems);
      r.text("axis", c.current_scan.axis, {"theta", "g", "t0"});
      if (const json* g = r.object("grid")) read_grid(*g, "current_scan.grid", c.current_scan.grid, problems);
      r.number("t0", c.current_scan.t0);
      r.integer("initial_n", c.current_scan.initial_n);
      r.integer("n_periods", c.current_scan.n_periods, [](long long n) { return n >= kMinTransportPeriods; },
                "must be at least 64");
      r.number("plateau_tol", c.current_scan.plateau_tol, positive, "must be positive");
    }
    if (const json* s = top.object("dimer")) {
      Reader r(*s, "dimer", problems);
      DimerParams& p = c.dimer.params;
      r.number("c", p.c);
      r.number("mu", p.mu, positive, "must be positive");
      r.number("f1", p.f1);
      r.number("f2", p.f2);
      r.number("omega", p.omega, positive, "must be positive");
      r.number("theta", p.theta);
      r.integer("steps_per_period", p.steps_per_period, [](long long n) { return n >= 128 && n % 128 == 0; },
                "must be a positive multiple of 128");
      r.number("g_max", c.dimer.g_max, nonnegative, "must be >= 0");
      r.number("dg", c.dimer.dg, positive, "must be positive");
      r.number("kick", c.dimer.kick, positive, "must be positive");
    }
    if (const json* s = top.object("husimi")) {
      Reader r(*s, "husimi", problems);
      r.integer("nx", c.husimi.nx, [](long long n) { return n >= 32; }, "must be at least 32");
      r.integer("np", c.husimi.np, [](long long n) { return n >= 32; }, "must be at least 32");
      r.number("p_min", c.husimi.p_min);
      r.number("p_max", c.husimi.p_max);
      if (!(c.husimi.p_max > c.husimi.p_min)) r.problem("husimi.p_max", "must exceed husimi.p_min");
    }
    if (const json* s = top.object("classification")) {
      Reader r(*s, "classification", problems);
      r.number("transport_momentum", c.classification.transport_momentum, positive, "must be positive");
      r.number("localization_ratio", c.classification.localization_ratio, positive, "must be positive");
    }
  }
  // Cross-field invariants, checked once the fields themselves are sane.
  if (problems.empty()) {
    try {
      c.model.validate(c.field);
    } catch (const std::invalid_argument& e) {
      problems.push_back(std::string("model.dt: ") + e.what());
    }
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path + ": cannot open config file"});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string resolved_config_json(const RunConfig& c) {
  json j;
  j["model"] = {{"mu", c.model.mu}, {"v0", c.model.v0}, {"g", c.model.g}, {"n_max", c.model.n_max}, {"dt", c.model.dt}};
  j["field"] = {{"e1", c.field.e1}, {"e2", c.field.e2}, {"omega", c.field.omega}, {"theta", c.field.theta}, {"t0", c.field.t0}};
  // Unset grids and selectors are left out so the output parses back.
  j["floquet_spectrum"] = {{"t0", c.floquet_spectrum.t0}, {"dump_states", c.floquet_spectrum.dump_states}};
  if (is_set(c.floquet_spectrum.theta_grid)) j["floquet_spectrum"]["theta_grid"] = grid_json(c.floquet_spectrum.theta_grid);
  j["continue"] = {{"theta", c.continuation.theta}, {"t0", c.continuation.t0}, {"g_max", c.continuation.g_max},
                   {"dg", c.continuation.dg}};
  if (is_set(c.continuation.seed)) j["continue"]["seed"] = selector_json(c.continuation.seed);
  if (c.continuation.partner) j["continue"]["partner"] = selector_json(*c.continuation.partner);
  j["current_scan"] = {{"axis", c.current_scan.axis}, {"t0", c.current_scan.t0}, {"initial_n", c.current_scan.initial_n},
                       {"n_periods", c.current_scan.n_periods}, {"plateau_tol", c.current_scan.plateau_tol}};
  if (is_set(c.current_scan.grid)) j["current_scan"]["grid"] = grid_json(c.current_scan.grid);
  const DimerParams& p = c.dimer.params;
  j["dimer"] = {{"c", p.c}, {"mu", p.mu}, {"f1", p.f1}, {"f2", p.f2}, {"omega", p.omega}, {"theta", p.theta},
                {"steps_per_period", p.steps_per_period}, {"g_max", c.dimer.g_max}, {"dg", c.dimer.dg},
                {"kick", c.dimer.kick}};
  j["husimi"] = {{"nx", c.husimi.nx}, {"np", c.husimi.np}, {"p_min", c.husimi.p_min}, {"p_max", c.husimi.p_max}};
  j["classification"] = {{"transport_momentum", c.classification.transport_momentum},
                         {"localization_ratio", c.classification.localization_ratio}};
  return j.dump();
}

}  // namespace ratchet
