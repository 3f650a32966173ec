#include "apgauge/config.hpp"

#include "apgauge/errors.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace apgauge {

using json = nlohmann::ordered_json;

namespace {

std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

// Reads one JSON object, remembering which keys were used.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "config" : path_, "expected an object");
  }

  bool has(const char* key) {
    used_.insert(key);
    return j_.contains(key);
  }
  const json& at(const char* key) {
    used_.insert(key);
    return j_.at(key);
  }
  std::string sub(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  template <class T>
  void get(const char* key, T& out) {
    if (!has(key)) return;
    read(j_.at(key), sub(key), out);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!used_.count(k)) fail(sub(k.c_str()), "unknown field");
  }

  [[noreturn]] static void fail(const std::string& field, const std::string& msg) {
    throw ConfigError("config: " + field + ": " + msg);
  }

  static void read(const json& v, const std::string& p, double& out) {
    if (!v.is_number()) fail(p, "expected a number");
    out = v.get<double>();
  }
  static void read(const json& v, const std::string& p, int& out) {
    if (!v.is_number_integer()) fail(p, "expected an integer");
    out = v.get<int>();
  }
  static void read(const json& v, const std::string& p, long long& out) {
    if (!v.is_number_integer()) fail(p, "expected an integer");
    out = v.get<long long>();
  }
  static void read(const json& v, const std::string& p, bool& out) {
    if (!v.is_boolean()) fail(p, "expected true or false");
    out = v.get<bool>();
  }
  static void read(const json& v, const std::string& p, std::string& out) {
    if (!v.is_string()) fail(p, "expected a string");
    out = v.get<std::string>();
  }
  static void read(const json& v, const std::string& p, cplx& out) {
    if (v.is_number()) {
      out = v.get<double>();
      return;
    }
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
      fail(p, "expected a number or [re, im]");
    out = cplx(v[0].get<double>(), v[1].get<double>());
  }
  template <class T>
  static void read(const json& v, const std::string& p, std::vector<T>& out) {
    if (!v.is_array()) fail(p, "expected an array");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      T x{};
      read(v[i], p + "[" + std::to_string(i) + "]", x);
      out.push_back(std::move(x));
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

// scalar or list
template <class T>
void get_list(Reader& r, const char* key, std::vector<T>& out) {
  if (!r.has(key)) return;
  const json& v = r.at(key);
  if (v.is_array()) {
    Reader::read(v, r.sub(key), out);
  } else {
    T x{};
    Reader::read(v, r.sub(key), x);
    out = {x};
  }
}

void read_window(const json& j, const std::string& p, WindowSpec& w) {
  Reader r(j, p);
  r.get("lo", w.lo);
  r.get("hi", w.hi);
  r.get("ramp", w.ramp);
  r.finish();
}

RunConfig from_json(const json& j) {
  RunConfig c;
  Reader r(j, "");
  r.get("dimension", c.dimension);
  if (r.has("base")) {
    Reader b(r.at("base"), "base");
    b.get("kind", c.base.kind);
    b.get("weights", c.base.weights);
    b.get("quartic", c.base.quartic);
    b.finish();
  }
  if (r.has("module")) {
    Reader m(r.at("module"), "module");
    m.get("generators", c.module.generators);
    m.get("frequencies", c.module.frequencies);
    if (m.has("decay")) {
      Reader d(m.at("decay"), "module.decay");
      DecayDecl dec;
      d.get("C", dec.C);
      d.get("rho", dec.rho);
      d.get("growth", dec.growth);
      d.finish();
      c.module.decay = dec;
    }
    m.get("infinite", c.module.infinite);
    m.finish();
  }
  if (r.has("coefficients")) {
    const json& arr = r.at("coefficients");
    if (!arr.is_array()) Reader::fail("coefficients", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = "coefficients[" + std::to_string(i) + "]";
      Reader e(arr[i], p);
      CoefficientSpec s;
      if (!e.has("frequency")) Reader::fail(p + ".frequency", "missing");
      e.get("frequency", s.frequency);
      e.get("kind", s.kind);
      e.get("value", s.value);
      e.get("param", s.param);
      if (e.has("monomials")) {
        const json& ms = e.at("monomials");
        if (!ms.is_array()) Reader::fail(p + ".monomials", "expected an array");
        for (std::size_t k = 0; k < ms.size(); ++k) {
          Reader mr(ms[k], p + ".monomials[" + std::to_string(k) + "]");
          MonomialSpec mono;
          mr.get("coeff", mono.coeff);
          mr.get("powers", mono.powers);
          mr.finish();
          s.monomials.push_back(mono);
        }
      }
      e.get("pair", s.pair);
      e.finish();
      c.coefficients.push_back(std::move(s));
    }
  }
  get_list(r, "eps", c.eps);
  get_list(r, "h", c.h);
  get_list(r, "tau", c.tau);
  get_list(r, "K", c.K);
  r.get("vartheta", c.vartheta);
  if (r.has("eps_law")) {
    Reader e(r.at("eps_law"), "eps_law");
    e.get("scale", c.eps_law.scale);
    e.get("power", c.eps_law.power);
    e.finish();
  }
  if (r.has("zone")) {
    Reader z(r.at("zone"), "zone");
    z.get("c", c.zone.c);
    z.get("diameter_factor", c.zone.diameter_factor);
    z.get("C0", c.zone.C0);
    z.get("delta", c.zone.delta);
    z.get("varsigma", c.zone.varsigma);
    z.get("sigma", c.zone.sigma);
    z.finish();
  }
  if (r.has("gauge")) {
    Reader g(r.at("gauge"), "gauge");
    g.get("M", c.gauge.M);
    g.get("ad_cap", c.gauge.ad_cap);
    g.get("sumset_order", c.gauge.sumset_order);
    g.get("guard", c.gauge.guard);
    g.get("resonant_ad_order", c.gauge.resonant_ad_order);
    g.finish();
  }
  if (r.has("oracle")) {
    Reader o(r.at("oracle"), "oracle");
    o.get("k_points", c.oracle.k_points);
    o.get("radius", c.oracle.radius);
    o.get("margin", c.oracle.margin);
    o.finish();
  }
  if (r.has("conditions")) {
    Reader k(r.at("conditions"), "conditions");
    get_list(k, "omega", c.conditions.omega);
    get_list(k, "L", c.conditions.L);
    get_list(k, "K", c.conditions.K);
    k.get("angle", c.conditions.angle);
    k.get("norm", c.conditions.norm);
    k.get("covolume", c.conditions.covolume);
    k.finish();
  }
  if (r.has("propagate")) {
    Reader pr(r.at("propagate"), "propagate");
    get_list(pr, "T", c.propagate.T);
    pr.get("k_samples", c.propagate.k_samples);
    if (pr.has("pairs")) {
      const json& arr = pr.at("pairs");
      if (!arr.is_array()) Reader::fail("propagate.pairs", "expected an array");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string p = "propagate.pairs[" + std::to_string(i) + "]";
        Reader e(arr[i], p);
        PropagationPair pp;
        e.get("name", pp.name);
        if (!e.has("q1") || !e.has("q2")) Reader::fail(p, "needs q1 and q2");
        read_window(e.at("q1"), p + ".q1", pp.q1);
        read_window(e.at("q2"), p + ".q2", pp.q2);
        e.finish();
        c.propagate.pairs.push_back(std::move(pp));
      }
    }
    pr.finish();
  }
  r.get("threads", c.threads);
  r.get("out", c.out);
  r.finish();
  return c;
}

json cplx_json(cplx v) { return v.imag() == 0.0 ? json(v.real()) : json::array({v.real(), v.imag()}); }

json window_json(const WindowSpec& w) { return json{{"lo", w.lo}, {"hi", w.hi}, {"ramp", w.ramp}}; }

json to_json(const RunConfig& c) {
  json j;
  j["dimension"] = c.dimension;
  j["base"] = {{"kind", c.base.kind}, {"weights", c.base.weights}, {"quartic", c.base.quartic}};
  json m;
  m["generators"] = c.module.generators;
  m["frequencies"] = c.module.frequencies;
  if (c.module.decay) m["decay"] = {{"C", c.module.decay->C}, {"rho", c.module.decay->rho}, {"growth", c.module.decay->growth}};
  m["infinite"] = c.module.infinite;
  j["module"] = m;
  json coeffs = json::array();
  for (const auto& s : c.coefficients) {
    json e;
    e["frequency"] = s.frequency;
    e["kind"] = s.kind;
    e["value"] = cplx_json(s.value);
    e["param"] = s.param;
    json ms = json::array();
    for (const auto& mono : s.monomials) ms.push_back({{"coeff", cplx_json(mono.coeff)}, {"powers", mono.powers}});
    e["monomials"] = ms;
    e["pair"] = s.pair;
    coeffs.push_back(e);
  }
  j["coefficients"] = coeffs;
  j["eps"] = c.eps;
  j["h"] = c.h;
  j["tau"] = c.tau;
  j["K"] = c.K;
  j["vartheta"] = c.vartheta;
  j["eps_law"] = {{"scale", c.eps_law.scale}, {"power", c.eps_law.power}};
  j["zone"] = {{"c", c.zone.c},     {"diameter_factor", c.zone.diameter_factor}, {"C0", c.zone.C0},
               {"delta", c.zone.delta}, {"varsigma", c.zone.varsigma},       {"sigma", c.zone.sigma}};
  j["gauge"] = {{"M", c.gauge.M},
                {"ad_cap", c.gauge.ad_cap},
                {"sumset_order", c.gauge.sumset_order},
                {"guard", c.gauge.guard},
                {"resonant_ad_order", c.gauge.resonant_ad_order}};
  j["oracle"] = {{"k_points", c.oracle.k_points}, {"radius", c.oracle.radius}, {"margin", c.oracle.margin}};
  j["conditions"] = {{"omega", c.conditions.omega}, {"L", c.conditions.L},       {"K", c.conditions.K},
                     {"angle", c.conditions.angle}, {"norm", c.conditions.norm}, {"covolume", c.conditions.covolume}};
  json pairs = json::array();
  for (const auto& p : c.propagate.pairs)
    pairs.push_back({{"name", p.name}, {"q1", window_json(p.q1)}, {"q2", window_json(p.q2)}});
  j["propagate"] = {{"T", c.propagate.T}, {"k_samples", c.propagate.k_samples}, {"pairs", pairs}};
  j["threads"] = c.threads;
  j["out"] = c.out;
  return j;
}

void apply_override(json& root, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + spec + "': expected key=value");
  const std::string key = spec.substr(0, eq), raw = spec.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  json* node = &root;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::string& p = parts[i];
    const bool last = i + 1 == parts.size();
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(p);
      } catch (const std::exception&) {
        throw ConfigError("override '" + key + "': '" + p + "' is not an array index");
      }
      if (idx >= node->size()) throw ConfigError("override '" + key + "': index " + p + " out of range");
      node = &(*node)[idx];
    } else {
      if (node->is_null()) *node = json::object();
      if (!node->is_object()) throw ConfigError("override '" + key + "': '" + p + "' is not inside an object");
      node = &(*node)[p];
    }
    if (last) *node = value;
  }
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: syntax error at " + line_col(text, e.byte == 0 ? 0 : e.byte - 1) + ": " +
                      std::string(e.what()).substr(std::string(e.what()).find(':') + 2));
  }
  for (const auto& o : overrides) apply_override(j, o);
  RunConfig c = from_json(j);
  validate_config(c);
  return c;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), overrides);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string serialize_config(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

void validate_config(const RunConfig& c) {
  const auto bad = [](const std::string& f, const std::string& m) { Reader::fail(f, m); };
  if (c.dimension != 1 && c.dimension != 2) bad("dimension", "must be 1 or 2");
  if (c.base.kind == "diagonal") {
    if (static_cast<int>(c.base.weights.size()) != c.dimension) bad("base.weights", "needs one weight per dimension");
    for (double w : c.base.weights)
      if (!(w > 0)) bad("base.weights", "weights must be positive");
  } else if (c.base.kind == "quartic") {
    if (!(c.base.quartic > 0)) bad("base.quartic", "must be positive");
  } else if (c.base.kind != "isotropic") {
    bad("base.kind", "unknown kind '" + c.base.kind + "' (isotropic, diagonal, quartic)");
  }
  const int r = c.module.generators.empty() ? c.dimension : static_cast<int>(c.module.generators.front().size());
  if (!c.module.generators.empty()) {
    if (static_cast<int>(c.module.generators.size()) != c.dimension)
      bad("module.generators", "needs one row per dimension");
    for (const auto& row : c.module.generators)
      if (static_cast<int>(row.size()) != r || r == 0) bad("module.generators", "rows must have equal nonzero length");
  }
  for (std::size_t i = 0; i < c.module.frequencies.size(); ++i)
    if (static_cast<int>(c.module.frequencies[i].size()) != r)
      bad("module.frequencies[" + std::to_string(i) + "]", "needs " + std::to_string(r) + " integer coordinates");
  for (std::size_t i = 0; i < c.coefficients.size(); ++i) {
    const auto& s = c.coefficients[i];
    const std::string p = "coefficients[" + std::to_string(i) + "]";
    if (static_cast<int>(s.frequency.size()) != r)
      bad(p + ".frequency", "needs " + std::to_string(r) + " integer coordinates");
    if (s.kind == "polynomial") {
      if (s.monomials.empty()) bad(p + ".monomials", "polynomial needs monomials");
      for (const auto& m : s.monomials)
        if (static_cast<int>(m.powers.size()) != c.dimension) bad(p + ".monomials", "powers need one entry per dimension");
    } else if (s.kind == "gaussian") {
      if (s.param < 0) bad(p + ".param", "gaussian width must be >= 0");
    } else if (s.kind != "constant" && s.kind != "reciprocal_power") {
      bad(p + ".kind", "unknown kind '" + s.kind + "' (constant, gaussian, reciprocal_power, polynomial)");
    }
  }
  if (c.eps.empty()) bad("eps", "empty list");
  if (c.h.empty()) bad("h", "empty list");
  if (c.tau.empty()) bad("tau", "empty list");
  if (c.K.empty()) bad("K", "empty list");
  for (double e : c.eps)
    if (e < 0) bad("eps", "must be >= 0");
  for (double h : c.h)
    if (!(h > 0 && h < 1)) bad("h", "must lie in (0, 1)");
  for (int k : c.K)
    if (k < 0) bad("K", "must be >= 0");
  if (c.vartheta < 0) bad("vartheta", "must be >= 0 (0 = automatic)");
  if (!(c.eps_law.scale >= 0)) bad("eps_law.scale", "must be >= 0");
  if (!(c.zone.c > 0)) bad("zone.c", "must be positive");
  if (!(c.zone.diameter_factor > 0)) bad("zone.diameter_factor", "must be positive");
  if (c.gauge.M < 1) bad("gauge.M", "must be >= 1");
  if (c.gauge.ad_cap < 2) bad("gauge.ad_cap", "must be >= 2");
  if (c.gauge.sumset_order < 1) bad("gauge.sumset_order", "must be >= 1");
  if (!(c.gauge.guard > 0 && c.gauge.guard <= 1)) bad("gauge.guard", "must lie in (0, 1]");
  if (c.gauge.resonant_ad_order < 1) bad("gauge.resonant_ad_order", "must be >= 1");
  if (c.oracle.k_points < 1) bad("oracle.k_points", "must be >= 1");
  if (c.oracle.radius < 0) bad("oracle.radius", "must be >= 0 (0 = automatic)");
  for (double w : c.conditions.omega)
    if (!(w > 0)) bad("conditions.omega", "must be positive");
  for (int L : c.conditions.L)
    if (L < 1) bad("conditions.L", "must be >= 1");
  for (int K : c.conditions.K)
    if (K < 1) bad("conditions.K", "must be >= 1");
  for (double T : c.propagate.T)
    if (!(T > 0)) bad("propagate.T", "must be positive");
  if (c.propagate.k_samples < 1) bad("propagate.k_samples", "must be >= 1");
  for (std::size_t i = 0; i < c.propagate.pairs.size(); ++i)
    for (const WindowSpec* w : {&c.propagate.pairs[i].q1, &c.propagate.pairs[i].q2}) {
      const std::string p = "propagate.pairs[" + std::to_string(i) + "]";
      if (static_cast<int>(w->lo.size()) != c.dimension || static_cast<int>(w->hi.size()) != c.dimension)
        bad(p, "window lo/hi need one entry per dimension");
      for (int k = 0; k < c.dimension; ++k)
        if (!(w->lo[static_cast<std::size_t>(k)] < w->hi[static_cast<std::size_t>(k)])) bad(p, "window needs lo < hi");
      if (!(w->ramp > 0)) bad(p, "window ramp must be positive");
    }
  if (c.threads < 0) bad("threads", "must be >= 0");
  if (c.out.empty()) bad("out", "empty output directory");

  // zone parameter inequalities at every (eps, h, K) of the run
  if (!c.coefficients.empty()) {
    const Operator op = c.build_operator();
    for (double e : c.eps)
      for (double h : c.h)
        for (int K : c.K) {
          try {
            c.zone_params(op, e, h, K).validate();
          } catch (const ConfigError& err) {
            bad("zone", std::string(err.what()) + " (eps = " + format_number(e) + ", h = " + format_number(h) +
                            ", K = " + std::to_string(K) + ")");
          }
        }
  }
}

ModulePtr RunConfig::build_module() const {
  const int r = module.generators.empty() ? dimension : static_cast<int>(module.generators.front().size());
  Eigen::MatrixXd G = Eigen::MatrixXd::Identity(dimension, r);
  if (!module.generators.empty())
    for (int i = 0; i < dimension; ++i)
      for (int k = 0; k < r; ++k)
        G(i, k) = module.generators[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
  std::vector<Coords> freqs = module.frequencies;
  if (freqs.empty())
    for (const auto& s : coefficients) {
      freqs.push_back(s.frequency);
      Coords neg = s.frequency;
      for (auto& v : neg) v = -v;
      freqs.push_back(neg);
    }
  return std::make_shared<const FrequencyModule>(G, freqs, module.decay, module.infinite);
}

Operator RunConfig::build_operator() const {
  BaseSymbol a0 = BaseSymbol::isotropic(dimension);
  if (base.kind == "diagonal") a0 = BaseSymbol::diagonal(base.weights);
  if (base.kind == "quartic") a0 = BaseSymbol::quartic(dimension, base.quartic);
  const ModulePtr mod = build_module();
  APSymbol b(mod);
  bool hermitian = true;
  for (const auto& s : coefficients) {
    CoefficientFn f;
    if (s.kind == "constant") f = CoefficientFn::constant(s.value);
    if (s.kind == "gaussian") f = CoefficientFn::gaussian(s.param, s.value);
    if (s.kind == "reciprocal_power") f = CoefficientFn::reciprocal_power(s.param, s.value);
    if (s.kind == "polynomial") {
      std::vector<Monomial> ms;
      for (const auto& m : s.monomials) ms.push_back({m.coeff, m.powers});
      f = CoefficientFn::polynomial(ms);
    }
    b.add_term(s.frequency, f);
    if (s.pair) {
      Coords neg = s.frequency;
      for (auto& v : neg) v = -v;
      b.add_term(neg, f.conjugated());
    } else {
      hermitian = false;
    }
  }
  b.set_hermitian(hermitian);
  return {a0, b};
}

ZoneParams RunConfig::zone_params(const Operator& op, double e, double hh, int KK) const {
  ZoneParams p = ZoneParams::defaults(dimension, e, hh, KK, op.b.empty() ? 0.0 : pipeline_params(op, e, hh, KK).C0 / 2,
                                      vartheta);
  p.c = zone.c;
  p.diameter_factor = zone.diameter_factor;
  if (zone.C0 >= 0) p.C0 = zone.C0;
  if (!zone.delta.empty()) p.delta = zone.delta;
  if (zone.varsigma >= 0) p.varsigma = zone.varsigma;
  if (zone.sigma >= 0) p.sigma = zone.sigma;
  return p;
}

PipelineControls RunConfig::pipeline_controls(int KK) const {
  PipelineControls pc;
  pc.K = KK;
  pc.gauge.M = gauge.M;
  pc.gauge.ad_cap = gauge.ad_cap;
  pc.gauge.sumset_order = gauge.sumset_order;
  pc.gauge.guard = gauge.guard;
  pc.resonant_gauge.M = gauge.M;
  pc.resonant_gauge.sumset_order = gauge.sumset_order;
  pc.resonant_gauge.guard = gauge.guard;
  pc.resonant_gauge.ad_order = gauge.resonant_ad_order;
  pc.threads = threads;
  pc.quad.threads = threads;
  return pc;
}

OracleControls RunConfig::oracle_controls() const {
  OracleControls oc;
  oc.k_points = oracle.k_points;
  oc.radius = oracle.radius;
  oc.margin = oracle.margin;
  oc.threads = threads;
  return oc;
}

}  // namespace apgauge
