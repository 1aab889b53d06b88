#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "loopcycle/errors.hpp"
#include "loopcycle/manifest.hpp"

namespace {

using loopcycle::Params;

// Flags shared by every run; only flags given on the command line reach the params.
struct Common {
  std::optional<std::string> d, N, eps, beta, gamma0, replicas, seed, threads, format;
  std::vector<std::string> extra;  // key=value
  std::string out;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--d", c.d, "dimension");
  app->add_option("--N", c.N, "box half-side (the box is [-N,N]^d)");
  app->add_option("--eps", c.eps, "scale parameter epsilon");
  app->add_option("--beta", c.beta, "big-loop exponent");
  app->add_option("--gamma0", c.gamma0, "chain exponent (a list for gamma_window)");
  app->add_option("--replicas", c.replicas, "replica count (a list for doubling)");
  app->add_option("--seed", c.seed, "base seed");
  app->add_option("--threads", c.threads, "worker threads (0 = all cores)");
  app->add_option("--format", c.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  app->add_option("--out", c.out, "output directory (default: $LOOPCYCLE_OUT or ./loopcycle-out)");
  app->add_option("--param,-p", c.extra, "extra parameter key=value, repeatable");
}

Params to_params(const Common& c) {
  Params p;
  auto put = [&](const char* key, const std::optional<std::string>& v) {
    if (v) p[key] = *v;
  };
  put("d", c.d);
  put("N", c.N);
  put("eps", c.eps);
  put("beta", c.beta);
  put("gamma0", c.gamma0);
  put("replicas", c.replicas);
  put("seed", c.seed);
  put("threads", c.threads);
  put("format", c.format);
  for (const auto& kv : c.extra) {
    auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw loopcycle::DomainError("expected key=value, got " + kv);
    p[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return p;
}

void print_manifest(const loopcycle::ExperimentManifest& m, const std::string& dir) {
  std::cout << m.experiment << " -> " << dir << "/manifest.json\n";
  for (const auto& o : m.outputs) std::cout << "  " << o.file << "  sha256:" << o.sha256 << "\n";
}

int run(const std::string& name, const Common& c) {
  std::string dir = c.out.empty() ? loopcycle::default_output_dir() : c.out;
  auto m = loopcycle::run_experiment(name, to_params(c), dir);
  print_manifest(m, dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"loop soup clusters, winding cycles and switching experiments"};
  app.require_subcommand(1);

  std::map<std::string, Common> common;
  for (const char* name : {"greens", "sample", "clusters", "detect", "switch"}) {
    auto* sub = app.add_subcommand(name, std::string("run the ") + name + " step");
    add_common(sub, common[name]);
  }

  auto* exp = app.add_subcommand("experiment", "run a named experiment");
  std::string exp_name;
  std::string names;
  for (const auto& n : loopcycle::experiment_names()) names += (names.empty() ? "" : ", ") + n;
  exp->add_option("name", exp_name, "one of: " + names)->required();
  add_common(exp, common["experiment"]);

  auto* replay = app.add_subcommand("replay", "re-run a manifest and compare output digests");
  std::string manifest_path, replay_out;
  replay->add_option("manifest", manifest_path, "path to manifest.json")->required()->check(CLI::ExistingFile);
  replay->add_option("--out", replay_out, "fresh output directory")->required();

  auto* list = app.add_subcommand("list", "list experiment names");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*list) {
      for (const auto& n : loopcycle::experiment_names()) std::cout << n << "\n";
      return 0;
    }
    if (*exp) return run(exp_name, common["experiment"]);
    if (*replay) {
      auto r = loopcycle::replay_manifest(manifest_path, replay_out);
      print_manifest(r.replayed, replay_out);
      if (r.identical()) {
        std::cout << "replay identical (" << r.original.outputs.size() << " files)\n";
        return 0;
      }
      for (const auto& f : r.mismatched) std::cout << "MISMATCH " << f << "\n";
      return 1;
    }
    for (auto& [name, c] : common) {
      if (name != "experiment" && app.got_subcommand(name)) return run(name, c);
    }
  } catch (const loopcycle::RejectionRateError& e) {
    std::cerr << "aborted: " << e.what() << " (rate " << e.rate() << ", attempts " << e.attempts() << ")\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
