#include "apgauge/commands.hpp"

#include "apgauge/errors.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace apgauge {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

struct Writer {
  fs::path dir;
  CommandResult result;

  void file(const std::string& name, const std::string& body) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw ResourceError("cannot write " + (dir / name).string());
    out << body;
    result.files.push_back(name);
  }
};

std::string jsonl(const std::vector<json>& records) {
  std::string s;
  for (const auto& r : records) s += r.dump() + "\n";
  return s;
}

json coords_json(const std::vector<Coords>& cs) {
  json a = json::array();
  for (const auto& c : cs) a.push_back(c);
  return a;
}

std::string where(double eps, double h, double tau) {
  return "eps = " + format_number(eps) + ", h = " + format_number(h) + ", tau = " + format_number(tau);
}

// Module errors keep their category; the message gains the run point.
template <class F>
auto tagged(const std::string& at, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.category(), std::string(e.what()) + " [" + at + "]");
  }
}

Box window_box(const WindowSpec& w) {
  Vec lo(static_cast<Eigen::Index>(w.lo.size())), hi(static_cast<Eigen::Index>(w.hi.size()));
  for (std::size_t i = 0; i < w.lo.size(); ++i) {
    lo[static_cast<Eigen::Index>(i)] = w.lo[i];
    hi[static_cast<Eigen::Index>(i)] = w.hi[i];
  }
  return {lo, hi};
}

// Distance between the boxes, each enlarged by `grow` times its ramp.
double separation(const WindowSpec& a, const WindowSpec& b, double grow) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.lo.size(); ++i) {
    const double ra = grow * a.ramp, rb = grow * b.ramp;
    const double gap = std::max(a.lo[i] - ra - (b.hi[i] + rb), b.lo[i] - rb - (a.hi[i] + ra));
    if (gap > 0) s += gap * gap;
  }
  return std::sqrt(s);
}

void cmd_conditions(const RunConfig& cfg, Writer& w) {
  const ModulePtr mod = cfg.build_module();
  ConditionThresholds th;
  th.angle = cfg.conditions.angle;
  th.norm = cfg.conditions.norm;
  th.covolume = cfg.conditions.covolume;
  std::vector<json> recs;
  std::ostringstream txt;
  bool all = true;
  for (double omega : cfg.conditions.omega)
    for (int L : cfg.conditions.L)
      for (int K : cfg.conditions.K) {
        const ConditionReport rep = check_conditions(*mod, K, omega, L, th);
        txt << "omega = " << format_number(omega) << ", L = " << L << ", K = " << K << ":";
        for (const auto& r : rep.records) {
          json j;
          j["omega"] = omega;
          j["L"] = L;
          j["K"] = K;
          j["condition"] = r.condition;
          j["status"] = status_name(r.status);
          j["value"] = r.value;
          j["threshold"] = r.threshold;
          j["witness"] = coords_json(r.witness);
          j["notes"] = r.notes;
          recs.push_back(j);
          txt << " " << r.condition << " " << status_name(r.status);
          if (r.status == ConditionStatus::Fail) {
            txt << " (witness";
            for (const auto& c : r.witness) {
              txt << " (";
              for (std::size_t i = 0; i < c.size(); ++i) txt << (i ? "," : "") << c[i];
              txt << ")";
            }
            txt << ")";
          }
          txt << ";";
        }
        txt << (rep.all_pass() ? " all pass" : " FAILED") << "\n";
        all = all && rep.all_pass();
      }
  w.file("conditions.jsonl", jsonl(recs));
  w.file("conditions.txt", txt.str());
  w.result.summary = txt.str() + (all ? "all conditions pass\n" : "some conditions fail\n");
}

void cmd_zones(const RunConfig& cfg, Writer& w) {
  const Operator op = cfg.build_operator();
  std::vector<json> recs;
  std::ostringstream txt;
  for (double eps : cfg.eps)
    for (double h : cfg.h)
      for (double tau : cfg.tau)
        for (int K : cfg.K) {
          const std::string at = where(eps, h, tau) + ", K = " + std::to_string(K);
          tagged(at, [&] {
            const ZoneParams p = cfg.zone_params(op, eps, h, K);
            const EnergyShell shell = make_shell(op.a0, tau, p);
            const ZoneDecomposition z = classify(op.a0, shell, *op.module(),
                                                 sumset(*op.module(), cfg.gauge.sumset_order), p, cfg.threads);
            json head;
            head["eps"] = eps;
            head["h"] = h;
            head["tau"] = tau;
            head["K"] = K;
            head["zone"] = "shell";
            head["cells"] = shell.cells.size();
            head["step"] = shell.step;
            head["width"] = shell.width;
            head["gamma"] = p.delta.empty() ? json(nullptr) : json(p.gamma(1));
            head["microhyperbolicity"] = microhyperbolicity_margin(op.a0, tau, shell);
            const double cv = convexity_margin(op.a0, tau, shell);
            head["convexity"] = std::isfinite(cv) ? json(cv) : json(nullptr);
            head["absorption_passes"] = z.absorption_passes;
            head["notes"] = z.notes;
            recs.push_back(head);
            json nr = {{"eps", eps}, {"h", h}, {"tau", tau}, {"K", K}, {"zone", "nonresonant"},
                       {"cells", z.nonresonant_cells().size()}};
            recs.push_back(nr);
            for (const auto& c : z.components) {
              json j = {{"eps", eps}, {"h", h}, {"tau", tau}, {"K", K}, {"zone", "component:" + std::to_string(c.id)}};
              j["level"] = c.level;
              j["V"] = coords_json(c.V.basis);
              j["witnesses"] = coords_json(c.witnesses);
              j["cells"] = c.cells.size();
              j["diameter"] = c.diameter;
              j["transverse_margin"] = c.transverse_margin;
              j["inner_max"] = c.inner_max;
              j["bbox_lo"] = std::vector<double>(c.bbox.lo.data(), c.bbox.lo.data() + c.bbox.lo.size());
              j["bbox_hi"] = std::vector<double>(c.bbox.hi.data(), c.bbox.hi.data() + c.bbox.hi.size());
              recs.push_back(j);
            }
            txt << at << ": " << shell.cells.size() << " shell cells, " << z.nonresonant_cells().size()
                << " non-resonant, " << z.components.size() << " resonant components\n";
          });
        }
  w.file("zones.jsonl", jsonl(recs));
  w.result.summary = txt.str();
}

void cmd_gauge(const RunConfig& cfg, Writer& w) {
  const Operator op = cfg.build_operator();
  std::vector<json> recs;
  std::ostringstream txt;
  bool all_exact = true;
  for (double eps : cfg.eps)
    for (double h : cfg.h)
      for (double tau : cfg.tau)
        for (int K : cfg.K) {
          const std::string at = where(eps, h, tau) + ", K = " + std::to_string(K);
          const auto chains = tagged(at, [&] {
            return pipeline_chains(op, eps, h, tau, cfg.zone_params(op, eps, h, K), cfg.pipeline_controls(K));
          });
          if (chains.empty()) txt << at << ": no gauge chain needed\n";
          for (const auto& [zone, ch] : chains) {
            json j = {{"eps", eps}, {"h", h}, {"tau", tau}, {"K", K}, {"zone", zone}};
            json steps = json::array();
            for (const auto& s : ch.steps)
              steps.push_back({{"eliminated", s.eliminated.size()},
                               {"gamma", s.gamma},
                               {"eps_before", s.eps_before},
                               {"eps_after", s.eps_after},
                               {"ad_order", s.ad_order},
                               {"remainder_proxy", s.remainder_proxy},
                               {"residual", s.residual},
                               {"warnings", s.warnings}});
            j["steps"] = steps;
            j["converged"] = ch.converged;
            j["remainder_bound"] = ch.remainder_bound;
            j["target_bound"] = ch.target_bound;
            j["final_residual"] = ch.final_residual;
            j["eps_sequence"] = ch.eps_sequence;
            j["support"] = coords_json(ch.perturbation.support());
            j["support_exact"] = ch.support_exact();
            recs.push_back(j);
            all_exact = all_exact && ch.support_exact();
            txt << at << ", " << zone << ": " << ch.steps.size() << " steps, remainder "
                << format_number(ch.remainder_bound) << (ch.converged ? " (at target)" : " (above target)")
                << ", support " << (ch.support_exact() ? "exact" : "NOT exact") << "\n";
          }
        }
  w.file("gauge.jsonl", jsonl(recs));
  if (!all_exact) throw InconsistencyError("gauge: a chain keeps frequencies outside V cap Theta'_K");
  w.result.summary = txt.str();
}

void cmd_ids(const RunConfig& cfg, Writer& w) {
  const Operator op = cfg.build_operator();
  SpectralTable t;
  std::vector<json> notes;
  for (double h : cfg.h)
    for (double eps : cfg.eps)
      for (double tau : cfg.tau)
        for (int K : cfg.K) {
          SpectralRow r;
          r.h = h;
          r.eps = eps;
          r.tau = tau;
          r.K = K;
          r.has_oracle = false;
          const IdsResult res = tagged(where(eps, h, tau) + ", K = " + std::to_string(K), [&] {
            return ids_pipeline(op, eps, h, tau, cfg.zone_params(op, eps, h, K), cfg.pipeline_controls(K));
          });
          r.n_pipeline = res.value;
          for (const auto& z : res.zones) r.zones[z.zone] = z.value;
          if (!res.converged) r.flag = "gauge remainder above target";
          t.rows.push_back(r);
          notes.push_back({{"h", h},
                           {"eps", eps},
                           {"tau", tau},
                           {"K", K},
                           {"steps", res.steps},
                           {"converged", res.converged},
                           {"remainder_bound", res.remainder_bound},
                           {"support_exact", res.support_exact},
                           {"notes", res.notes}});
        }
  w.file("ids.csv", t.csv());
  w.file("ids_runs.jsonl", jsonl(notes));
  w.result.summary = t.csv();
}

void cmd_oracle(const RunConfig& cfg, Writer& w) {
  const Operator op = cfg.build_operator();
  if (!is_periodic(*op.module())) throw UnsupportedError("oracle: the frequency module is not a lattice");
  SpectralTable t;
  for (double h : cfg.h)
    for (double eps : cfg.eps) {
      double tmax = cfg.tau.front();
      for (double tau : cfg.tau) tmax = std::max(tmax, tau);
      const auto vals = tagged(where(eps, h, tmax), [&] {
        return BlochOracle(op, h, eps, tmax, cfg.oracle_controls()).ids(cfg.tau);
      });
      for (std::size_t i = 0; i < cfg.tau.size(); ++i) {
        SpectralRow r;
        r.h = h;
        r.eps = eps;
        r.tau = cfg.tau[i];
        r.K = 0;
        r.has_pipeline = false;
        r.n_oracle = vals[i];
        t.rows.push_back(r);
      }
    }
  w.file("oracle.csv", t.csv());
  w.result.summary = t.csv();
}

void cmd_converge(const RunConfig& cfg, Writer& w) {
  const Operator op = cfg.build_operator();
  StudyControls sc;
  sc.pipeline = cfg.pipeline_controls(cfg.K.front());
  sc.oracle = cfg.oracle_controls();
  sc.threads = cfg.threads;
  sc.params = [&cfg](const Operator& o, double eps, double h, int K) { return cfg.zone_params(o, eps, h, K); };
  std::string csv, slopes;
  for (double tau : cfg.tau) {
    const SpectralTable t = convergence_study(op, tau, cfg.h, cfg.eps_law, cfg.K, sc);
    const std::string body = t.csv();
    csv += csv.empty() ? body : body.substr(body.find('\n') + 1);
    for (const auto& s : t.slopes) {
      json j;
      j["tau"] = tau;
      j["K"] = s.K;
      j["slope"] = std::isfinite(s.slope) ? json(s.slope) : json(nullptr);
      j["increment"] = std::isfinite(s.increment) ? json(s.increment) : json(nullptr);
      j["points"] = s.points;
      slopes += j.dump() + "\n";
    }
  }
  w.file("converge.csv", csv);
  w.file("slopes.jsonl", slopes);
  w.result.summary = csv + slopes;
}

void cmd_propagate(const RunConfig& cfg, Writer& w) {
  const Operator op = cfg.build_operator();
  if (!is_periodic(*op.module())) throw UnsupportedError("propagate: the frequency module is not a lattice");
  if (cfg.propagate.pairs.empty()) throw ConfigError("propagate: no window pairs configured (propagate.pairs)");
  std::vector<json> recs;
  std::ostringstream txt;
  for (const auto& pair : cfg.propagate.pairs) {
    const CutoffSymbol c1(window_box(pair.q1), pair.q1.ramp), c2(window_box(pair.q2), pair.q2.ramp);
    const XiFunction q1 = [c1](const Vec& xi) { return c1(xi); };
    const XiFunction q2 = [c2](const Vec& xi) { return c2(xi); };
    const double sep = separation(pair.q1, pair.q2, 0.0), gap = separation(pair.q1, pair.q2, 1.0);
    for (double eps : cfg.eps)
      for (double h : cfg.h)
        for (double T : cfg.propagate.T) {
          const double norm = tagged("pair " + pair.name + ", " + where(eps, h, cfg.tau.front()), [&] {
            return propagation_norm(op, q1, q2, T, h, eps, cfg.propagate.k_samples, cfg.oracle.radius);
          });
          recs.push_back(
              {{"pair", pair.name}, {"eps", eps}, {"h", h}, {"T", T}, {"separation", sep}, {"support_gap", gap}, {"norm", norm}});
          txt << pair.name << ": eps = " << format_number(eps) << ", h = " << format_number(h)
              << ", T = " << format_number(T) << ", separation " << format_number(sep) << ", norm "
              << format_number(norm) << "\n";
        }
  }
  w.file("propagate.jsonl", jsonl(recs));
  w.result.summary = txt.str();
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"conditions", "zones", "gauge", "ids", "oracle", "converge", "propagate"};
  return names;
}

CommandResult run_command(const std::string& name, const RunConfig& cfg, const std::string& out_dir) {
  Writer w;
  w.dir = out_dir;
  std::error_code ec;
  fs::create_directories(w.dir, ec);
  if (ec) throw ResourceError("cannot create " + out_dir + ": " + ec.message());

  if (name == "conditions") cmd_conditions(cfg, w);
  else if (name == "zones") cmd_zones(cfg, w);
  else if (name == "gauge") cmd_gauge(cfg, w);
  else if (name == "ids") cmd_ids(cfg, w);
  else if (name == "oracle") cmd_oracle(cfg, w);
  else if (name == "converge") cmd_converge(cfg, w);
  else if (name == "propagate") cmd_propagate(cfg, w);
  else throw ConfigError("unknown command '" + name + "'");

  json manifest;
  manifest["command"] = name;
  manifest["config"] = json::parse(serialize_config(cfg));
  manifest["files"] = w.result.files;
  std::ofstream(w.dir / "manifest.json", std::ios::binary) << manifest.dump(2) << "\n";
  w.result.files.push_back("manifest.json");
  return w.result;
}

}  // namespace apgauge
