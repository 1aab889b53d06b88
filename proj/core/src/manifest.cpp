#include "loopcycle/manifest.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "loopcycle/clusters.hpp"
#include "loopcycle/digest.hpp"
#include "loopcycle/errors.hpp"
#include "loopcycle/events.hpp"
#include "loopcycle/experiments.hpp"
#include "loopcycle/greens.hpp"
#include "loopcycle/loop_sampler.hpp"
#include "loopcycle/switching.hpp"
#include "loopcycle/version.hpp"

namespace loopcycle {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string ExperimentManifest::to_json() const {
  json j;
  j["experiment"] = experiment;
  j["status"] = status;
  j["params"] = params;
  j["seed"] = seed;
  j["seed_scheme"] = seed_scheme;
  j["version"] = version;
  j["git_hash"] = git_hash;
  j["backends"] = backends;
  j["kappa"] = kappa;
  j["conventions"] = conventions;
  json outs = json::array();
  for (const auto& o : outputs) outs.push_back({{"file", o.file}, {"sha256", o.sha256}});
  j["outputs"] = outs;
  return j.dump(2) + "\n";
}

ExperimentManifest ExperimentManifest::from_json(const std::string& text) {
  json j = json::parse(text);
  ExperimentManifest m;
  m.experiment = j.at("experiment").get<std::string>();
  m.status = j.value("status", "ok");
  m.params = j.at("params").get<Params>();
  m.seed = j.value("seed", std::uint64_t{0});
  m.seed_scheme = j.value("seed_scheme", "");
  m.version = j.value("version", "");
  m.git_hash = j.value("git_hash", "");
  m.backends = j.value("backends", std::vector<std::string>{});
  m.kappa = j.value("kappa", 0.0);
  m.conventions = j.value("conventions", std::map<std::string, std::string>{});
  for (const auto& o : j.at("outputs")) m.outputs.push_back({o.at("file"), o.at("sha256")});
  return m;
}

ExperimentManifest ExperimentManifest::read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot read manifest " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string default_output_dir() {
  const char* env = std::getenv("LOOPCYCLE_OUT");
  return env && *env ? env : "loopcycle-out";
}

namespace {

// Reads typed parameters, filling defaults and recording the effective value.
class Reader {
 public:
  explicit Reader(const Params& given) : given_(given) {}

  std::string str(const std::string& key, const std::string& def) {
    auto it = given_.find(key);
    std::string v = it == given_.end() ? def : it->second;
    effective_[key] = v;
    return v;
  }
  int integer(const std::string& key, int def) { return static_cast<int>(parse_int(key, str(key, std::to_string(def)))); }
  std::int64_t count(const std::string& key, std::int64_t def) { return parse_int(key, str(key, std::to_string(def))); }
  std::uint64_t seed(const std::string& key, std::uint64_t def) {
    std::string v = str(key, std::to_string(def));
    try {
      std::size_t pos = 0;
      auto x = std::stoull(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw DomainError("parameter " + key + " is not an unsigned integer: " + v);
    }
  }
  double real(const std::string& key, const std::string& def) { return parse_real(key, str(key, def)); }
  std::vector<int> ints(const std::string& key, const std::string& def) {
    std::vector<int> out;
    for (const auto& t : split(str(key, def))) out.push_back(static_cast<int>(parse_int(key, t)));
    return out;
  }
  std::vector<double> reals(const std::string& key, const std::string& def) {
    std::vector<double> out;
    for (const auto& t : split(str(key, def))) out.push_back(parse_real(key, t));
    return out;
  }
  std::string format() {
    std::string f = str("format", "json");
    if (f != "json" && f != "csv") throw DomainError("format must be json or csv");
    return f;
  }
  int threads() { return integer("threads", 1); }

  const Params& effective() const { return effective_; }
  void reject_unknown() const {
    for (const auto& [k, v] : given_) {
      if (!effective_.count(k)) throw DomainError("unknown parameter '" + k + "' for this experiment");
    }
  }

 private:
  static std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
      if (ch == ',') {
        out.push_back(cur);
        cur.clear();
      } else if (ch != ' ') {
        cur += ch;
      }
    }
    if (!cur.empty() || !out.empty()) out.push_back(cur);
    return out;
  }
  static std::int64_t parse_int(const std::string& key, const std::string& v) {
    try {
      std::size_t pos = 0;
      auto x = std::stoll(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw DomainError("parameter " + key + " is not an integer: " + v);
    }
  }
  static double parse_real(const std::string& key, const std::string& v) {
    try {
      std::size_t pos = 0;
      double x = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw DomainError("parameter " + key + " is not a number: " + v);
    }
  }

  const Params& given_;
  Params effective_;
};

struct Context {
  fs::path dir;
  ExperimentManifest m;

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw DomainError("cannot write " + (dir / name).string());
    out << content;
    out.close();
    m.outputs.push_back({name, sha256_file((dir / name).string())});
  }
};

std::string kappa_default(int d) {
  std::ostringstream os;
  os.precision(17);
  os << default_kappa(d);
  return os.str();
}

std::string zeros(int d) {
  std::string s;
  for (int k = 0; k < d; ++k) s += k ? ",0" : "0";
  return s;
}

Point point_param(Reader& r, const std::string& key, int d) {
  auto c = r.ints(key, zeros(d));
  if (static_cast<int>(c.size()) != d) throw DomainError("parameter " + key + " needs " + std::to_string(d) + " coordinates");
  return Point(c);
}

Tube tube_param(Reader& r, int d) {
  auto v = r.reals("tube", "0,1,0.5,0.5");
  if (v.size() != 4) throw DomainError("tube is i,j,u,v");
  Tube t = Tube::make(static_cast<int>(v[0]), static_cast<int>(v[1]), v[2], v[3]);
  validate(t, d);
  return t;
}

const std::vector<std::string> kLoopBackend{"loop_soup"};

void run_greens(Reader& r, Context& cx) {
  BoxConfig box{r.integer("d", 3), r.integer("N", 4)};
  Point src = point_param(r, "source", box.d);
  auto fmt = r.format();
  r.reject_unknown();
  validate(box);
  Lattice lat(box);
  auto col = green_column(box, src);
  if (fmt == "csv") {
    std::ostringstream os;
    write_green_column_csv(os, lat, col);
    cx.write("greens.csv", os.str());
  } else {
    json j;
    j["source"] = src.coords;
    j["relative_residual"] = col.relative_residual;
    j["iterations"] = col.iterations;
    j["values"] = col.values;
    cx.write("greens.json", j.dump() + "\n");
  }
  cx.m.backends = {"green_cg"};
}

void run_sample(Reader& r, Context& cx) {
  BoxConfig box{r.integer("d", 3), r.integer("N", 4)};
  auto seed = r.seed("seed", 1);
  double cutoff = r.real("cutoff", "0");
  r.format();
  r.reject_unknown();
  cx.m.seed = seed;
  auto table = loop_intensity(box, suggested_lmax(box));
  SoupSample s = cutoff > 0 ? sample_large_loops(table, cutoff, seed) : sample_soup(table, seed);
  Lattice lat(box);
  std::ostringstream os;
  write_loops_ndjson(os, lat, s.loops);
  cx.write("loops.ndjson", os.str());
  double occ = 0.0;
  for (double x : s.occupation) occ += x;
  json j{{"loops", s.loops.size()},   {"lmax", s.lmax},           {"tail_bound", s.tail_bound},
         {"table_hash", s.table_hash}, {"total_occupation", occ}, {"mode", cutoff > 0 ? "large_only" : "full"}};
  cx.write("sample.json", j.dump(2) + "\n");
  cx.m.backends = kLoopBackend;
}

SoupSample bridged_soup(const BoxConfig& box, std::uint64_t seed, double kappa) {
  auto table = loop_intensity(box, suggested_lmax(box));
  SoupSample s = sample_soup(table, seed);
  attach_bridges(s, kappa);
  return s;
}

void run_clusters(Reader& r, Context& cx) {
  BoxConfig box{r.integer("d", 3), r.integer("N", 4)};
  auto seed = r.seed("seed", 1);
  double eps = r.real("eps", "0.5");
  double kappa = r.real("kappa", kappa_default(box.d));
  ClusterOptions co;
  co.min_diameter = r.integer("min_diameter", 0);
  r.format();
  r.reject_unknown();
  cx.m.seed = seed;
  cx.m.kappa = kappa;
  SoupSample s = bridged_soup(box, seed, kappa);
  auto clusters = build_clusters(s, co);
  auto hits = detect_C_eps(s, clusters, tube_family(eps, box));
  Lattice lat(box);
  std::ostringstream os;
  write_clusters_ndjson(os, lat, clusters);
  cx.write("clusters.ndjson", os.str());
  std::vector<std::int64_t> ids;
  for (auto h : hits) ids.push_back(clusters[h].id);
  json j{{"materialized", clusters.size()}, {"components", cluster_count(s)}, {"C_eps", ids}};
  cx.write("clusters.json", j.dump(2) + "\n");
  cx.m.backends = kLoopBackend;
}

void run_detect(Reader& r, Context& cx) {
  BoxConfig box{r.integer("d", 3), r.integer("N", 4)};
  auto seed = r.seed("seed", 1);
  double eps = r.real("eps", "0.5");
  double kappa = r.real("kappa", kappa_default(box.d));
  ExponentConfig ec;
  ec.d = box.d;
  ec.a = r.real("a", "0.95");
  ec.b = r.real("b", "0.9");
  ec.c = r.real("c", "0.5");
  ec.alpha = r.real("alpha", "0.95");
  ec.beta = r.real("beta", "0.9");
  ec.gamma = r.real("gamma", "0.5");
  ec.gamma0 = r.real("gamma0", "0.6");
  auto fmt = r.format();
  r.reject_unknown();
  cx.m.seed = seed;
  cx.m.kappa = kappa;
  SoupSample s = bridged_soup(box, seed, kappa);
  auto clusters = build_clusters(s);
  auto family = tube_family(eps, box);
  auto hits = detect_C_eps(s, clusters, family);
  auto b = detect_B_eps(s, family);
  ClassifyConfig cc;
  cc.eps = eps;
  cc.beta = ec.beta;
  cc.gamma0 = ec.gamma0;
  auto report = classify_clusters(s, clusters, hits, b, cc);

  std::vector<EventWitness> all;
  auto p = detect_pinching(s, ec);
  auto t = detect_two_mesoscopic(s, clusters, ec);
  auto f = detect_distant_connection(s, ec);
  all.insert(all.end(), p.begin(), p.end());
  all.insert(all.end(), t.begin(), t.end());
  all.insert(all.end(), f.begin(), f.end());
  Lattice lat(box);
  std::ostringstream os;
  write_witnesses_csv(os, lat, seed, all);
  cx.write("witnesses.csv", os.str());

  json j;
  j["pinching"] = p.size();
  j["two_mesoscopic"] = t.size();
  j["distant_connection"] = f.size();
  j["B_eps"] = b.size();
  j["exponents"] = box.d > 4 ? json::parse(check_abc_conditions(ec).to_json()) : json(nullptr);
  j["classification"] = json::parse(report.to_json());
  if (fmt == "json") {
    cx.write("detect.json", j.dump(2) + "\n");
  } else {
    std::ostringstream cs;
    cs << "pinching,two_mesoscopic,distant_connection,K_eps,B_eps,type1,type2,neither\n"
       << p.size() << ',' << t.size() << ',' << f.size() << ',' << report.k_eps << ',' << b.size() << ','
       << report.type1 << ',' << report.type2 << ',' << report.neither << "\n";
    cx.write("detect.csv", cs.str());
  }
  cx.m.backends = kLoopBackend;
}

void run_switch(Reader& r, Context& cx) {
  BoxConfig box{r.integer("d", 3), r.integer("N", 6)};
  Tube tube = tube_param(r, box.d);
  double eps = r.real("eps", "0");
  auto replicas = r.count("replicas", 1000);
  auto seed = r.seed("seed", 1);
  SwitchOptions so;
  so.kappa = r.real("kappa", kappa_default(box.d));
  so.threads = r.threads();
  auto fmt = r.format();
  r.reject_unknown();
  cx.m.seed = seed;
  cx.m.kappa = so.kappa;
  auto st = switching_experiment(box, tube, eps, replicas, seed, so);
  std::ostringstream os;
  os << "replica,cluster,size,index,sigma,parity\n";
  for (const auto& rec : st.records) {
    os << rec.replica << ',' << rec.cluster << ',' << rec.size << ',' << rec.index << ',' << rec.sigma << ','
       << rec.parity << "\n";
  }
  cx.write("switching_records.csv", os.str());
  if (fmt == "json") {
    cx.write("switching.json", st.to_json() + "\n");
  } else {
    std::ostringstream cs;
    cs << "group,min_size,max_size,even,n,ci_lo,ci_hi\n";
    auto w = st.wilson();
    cs << "all,,," << st.even << ',' << st.n() << ',' << w.lo << ',' << w.hi << "\n";
    int g = 0;
    for (const auto& d : st.by_size_decile()) {
      cs << g++ << ',' << d.min_size << ',' << d.max_size << ',' << d.even << ',' << d.n << ',' << d.ci.lo << ','
         << d.ci.hi << "\n";
    }
    cx.write("switching.csv", cs.str());
  }
  cx.m.backends = kLoopBackend;
}

ClassifyConfig classify_params(Reader& r, double eps) {
  ClassifyConfig cc;
  cc.eps = eps;
  cc.beta = r.real("beta", "0.9");
  cc.gamma0 = r.real("gamma0", "0.6");
  cc.small_fraction = r.real("small_fraction", "0.1");
  return cc;
}

void run_doubling(Reader& r, Context& cx) {
  int d = r.integer("d", 7);
  auto Ns = r.ints("Ns", "3,4,5");
  double eps = r.real("eps", "0.5");
  auto reps_in = r.ints("replicas", "400,200,100");
  auto seed = r.seed("seed", 1);
  auto cc = classify_params(r, eps);
  RunOptions ro;
  ro.kappa = r.real("kappa", kappa_default(d));
  ro.threads = r.threads();
  auto fmt = r.format();
  r.reject_unknown();
  std::vector<std::int64_t> reps(reps_in.begin(), reps_in.end());
  if (reps.size() == 1 && Ns.size() > 1) reps.assign(Ns.size(), reps.front());
  cx.m.seed = seed;
  cx.m.kappa = ro.kappa;
  cx.m.seed_scheme += "; N uses derive_seed(seed, estimator stream, N) as its base seed";
  auto rep = doubling_experiment(d, Ns, eps, reps, seed, cc, ro);
  if (fmt == "json") {
    cx.write("doubling.json", rep.to_json() + "\n");
  } else {
    cx.write("doubling.csv", rep.summary_csv());
  }
  cx.write("doubling_replicas.csv", rep.replicas_csv());
  cx.m.backends = kLoopBackend;
}

void run_gamma_window(Reader& r, Context& cx) {
  BoxConfig box{r.integer("d", 3), r.integer("N", 4)};
  double eps = r.real("eps", "0.5");
  double beta = r.real("beta", "0.9");
  auto gammas = r.reals("gamma0", "0,0.2,0.4,0.5,0.6,0.7,0.8,0.9,1");
  auto replicas = r.count("replicas", 200);
  auto seed = r.seed("seed", 1);
  RunOptions ro;
  ro.kappa = r.real("kappa", kappa_default(box.d));
  ro.threads = r.threads();
  auto fmt = r.format();
  r.reject_unknown();
  cx.m.seed = seed;
  cx.m.kappa = ro.kappa;
  auto rep = gamma_window_experiment(box, eps, beta, gammas, replicas, seed, ro);
  if (fmt == "json") {
    cx.write("gamma_window.json", rep.to_json() + "\n");
  } else {
    cx.write("gamma_window.csv", rep.to_csv());
  }
  cx.m.backends = kLoopBackend;
}

void run_hausdorff(Reader& r, Context& cx) {
  BoxConfig box{r.integer("d", 3), r.integer("N", 8)};
  double eps = r.real("eps", "0.125");
  double beta = r.real("beta", "0.9");
  auto replicas = r.count("replicas", 50);
  auto seed = r.seed("seed", 1);
  HausdorffOptions ho;
  ho.resample.scope = resample_scope_from_string(r.str("scope", "inside_cluster"));
  ho.resample.min_acceptance_rate = r.real("min_rate", "1e-5");
  ho.resample.kappa = r.real("kappa", kappa_default(box.d));
  ho.max_cluster_vertices = r.count("max_cluster", 200);
  ho.threads = r.threads();
  auto fmt = r.format();
  r.reject_unknown();
  cx.m.seed = seed;
  cx.m.kappa = ho.resample.kappa;
  cx.m.backends = kLoopBackend;
  try {
    auto rep = hausdorff_experiment(box, eps, beta, replicas, seed, ho);
    if (fmt == "json") {
      cx.write("hausdorff.json", rep.to_json() + "\n");
    } else {
      cx.write("hausdorff.csv", rep.to_csv());
    }
  } catch (const RejectionRateError& e) {
    json j{{"aborted", true}, {"reason", e.what()}, {"rate", e.rate()}, {"attempts", e.attempts()},
           {"min_rate", ho.resample.min_acceptance_rate}};
    cx.write("hausdorff_abort.json", j.dump(2) + "\n");
    cx.m.status = "aborted";
    throw;
  }
}

void run_point_on_loop(Reader& r, Context& cx) {
  int d = r.integer("d", 3);
  auto Ns = r.ints("Ns", "4,8,16");
  double a = r.real("a", "0.5");
  auto replicas = r.count("replicas", 2000);
  auto seed = r.seed("seed", 1);
  int threads = r.threads();
  auto fmt = r.format();
  r.reject_unknown();
  cx.m.seed = seed;
  auto rep = point_on_big_loop_scaling(d, Ns, a, replicas, seed, threads);
  if (fmt == "json") {
    cx.write("point_on_loop.json", rep.to_json() + "\n");
  } else {
    cx.write("point_on_loop.csv", rep.to_csv());
  }
  cx.m.backends = kLoopBackend;
}

void run_kappa_calibration(Reader& r, Context& cx) {
  BoxConfig box{r.integer("d", 3), r.integer("N", 4)};
  auto mult = r.reals("multipliers", "0.8,0.9,1,1.1,1.2");
  auto replicas = r.count("replicas", 20000);
  auto seed = r.seed("seed", 1);
  int threads = r.threads();
  auto fmt = r.format();
  r.reject_unknown();
  cx.m.seed = seed;
  auto cal = calibrate_kappa(box, calibration_pairs(), mult, replicas, seed, threads);
  cx.m.kappa = cal.kappa();
  if (fmt == "json") {
    cx.write("kappa_calibration.json", cal.to_json() + "\n");
  } else {
    cx.write("kappa_calibration.csv", cal.to_csv());
  }
  cx.m.backends = {"loop_soup", "gff_cable"};
}

void run_arcsine(Reader& r, Context& cx) {
  BoxConfig box{r.integer("d", 3), r.integer("N", 4)};
  double kappa = r.real("kappa", kappa_default(box.d));
  auto replicas = r.count("replicas", 100000);
  auto seed = r.seed("seed", 1);
  int threads = r.threads();
  auto fmt = r.format();
  r.reject_unknown();
  cx.m.seed = seed;
  cx.m.kappa = kappa;
  for (Backend b : {Backend::kLoop, Backend::kGff}) {
    auto rep = two_point_experiment(box, b, held_out_pairs(), kappa, replicas, seed, threads);
    std::string name = "arcsine_" + to_string(b);
    if (fmt == "json") {
      cx.write(name + ".json", rep.to_json() + "\n");
    } else {
      cx.write(name + ".csv", rep.to_csv());
    }
  }
  cx.m.backends = {"loop_soup", "gff_cable"};
}

void run_cross_backend(Reader& r, Context& cx) {
  BoxConfig box{r.integer("d", 3), r.integer("N", 3)};
  double kappa = r.real("kappa", kappa_default(box.d));
  auto replicas = r.count("replicas", 20000);
  auto seed = r.seed("seed", 1);
  int threads = r.threads();
  auto fmt = r.format();
  r.reject_unknown();
  cx.m.seed = seed;
  cx.m.kappa = kappa;
  auto rep = cross_backend_experiment(box, held_out_pairs(), kappa, replicas, seed, threads);
  if (fmt == "json") cx.write("cross_backend.json", rep.to_json() + "\n");
  cx.write("cross_backend_counts.csv", rep.to_csv());
  cx.m.backends = {"loop_soup", "gff_cable"};
}

void run_abc(Reader& r, Context& cx) {
  ExponentConfig ec;
  ec.d = r.integer("d", 7);
  ec.a = r.real("a", "0.95");
  ec.b = r.real("b", "0.9");
  ec.c = r.real("c", "0.5");
  ec.alpha = r.real("alpha", "0.95");
  ec.beta = r.real("beta", "0.9");
  ec.gamma = r.real("gamma", "0.5");
  ec.gamma0 = r.real("gamma0", "0.6");
  r.format();
  r.reject_unknown();
  cx.write("abc.json", check_abc_conditions(ec).to_json() + "\n");
  cx.m.backends = {};
}

using Runner = std::function<void(Reader&, Context&)>;

const std::map<std::string, Runner>& runners() {
  static const std::map<std::string, Runner> m{
      {"abc", run_abc},
      {"arcsine", run_arcsine},
      {"clusters", run_clusters},
      {"cross_backend", run_cross_backend},
      {"detect", run_detect},
      {"doubling", run_doubling},
      {"gamma_window", run_gamma_window},
      {"greens", run_greens},
      {"hausdorff", run_hausdorff},
      {"kappa_calibration", run_kappa_calibration},
      {"point_on_loop", run_point_on_loop},
      {"sample", run_sample},
      {"switch", run_switch},
  };
  return m;
}

std::map<std::string, std::string> conventions() {
  return {
      {"diameter", "L-infinity extent of lattice coordinates"},
      {"event_distance", "Euclidean distance between lattice points"},
      {"vertex_id", "sum over k of (c_k + N) (2N+1)^k"},
      {"edge_id", "lower endpoint id * d + axis"},
      {"steps", "R/L U/D F/B G/g H/h I/i J/j for axes 0..6, + then -"},
      {"bridge", "uncrossed edge open with probability 1 - exp(-kappa sqrt(L_a L_b))"},
      {"gff_edge", "same-sign edge open with probability 1 - exp(-kappa phi_a phi_b)"},
      {"kappa", "1/d from the unit-rate walk normalization; checked against the arcsine two-point law"},
      {"cluster_clearance", "eps N / 2 with diameter >= 2 eps N"},
      {"loop_clearance", "eps N"},
  };
}

}  // namespace

std::vector<std::string> experiment_names() {
  std::vector<std::string> out;
  for (const auto& [k, v] : runners()) out.push_back(k);
  return out;
}

ExperimentManifest run_experiment(const std::string& name, const Params& params, const std::string& out_dir) {
  auto it = runners().find(name);
  if (it == runners().end()) throw DomainError("unknown experiment: " + name);
  fs::create_directories(out_dir);
  Reader reader(params);
  Context cx;
  cx.dir = out_dir;
  cx.m.experiment = name;
  cx.m.version = kVersion;
  cx.m.git_hash = kGitHash;
  cx.m.conventions = conventions();
  cx.m.seed_scheme = "replica r uses replica_seed(seed, r) (splitmix64 stream derivation)";
  auto finish = [&] {
    cx.m.params = reader.effective();
    std::ofstream out(fs::path(out_dir) / "manifest.json", std::ios::binary);
    out << cx.m.to_json();
  };
  try {
    it->second(reader, cx);
  } catch (const RejectionRateError&) {
    finish();
    throw;
  }
  finish();
  return cx.m;
}

ReplayResult replay_manifest(const std::string& manifest_path, const std::string& out_dir) {
  ReplayResult r;
  r.original = ExperimentManifest::read(manifest_path);
  if (fs::weakly_canonical(fs::path(manifest_path).parent_path()) == fs::weakly_canonical(out_dir)) {
    throw DomainError("replay needs a fresh output directory");
  }
  try {
    r.replayed = run_experiment(r.original.experiment, r.original.params, out_dir);
  } catch (const RejectionRateError&) {
    r.replayed = ExperimentManifest::read((fs::path(out_dir) / "manifest.json").string());
  }
  std::map<std::string, std::string> now;
  for (const auto& o : r.replayed.outputs) now[o.file] = o.sha256;
  for (const auto& o : r.original.outputs) {
    auto f = now.find(o.file);
    if (f == now.end() || f->second != o.sha256) r.mismatched.push_back(o.file);
    if (f != now.end()) now.erase(f);
  }
  for (const auto& [file, digest] : now) r.mismatched.push_back(file);
  return r;
}

}  // namespace loopcycle
