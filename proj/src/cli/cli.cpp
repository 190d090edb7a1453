#include "neurasim/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>
#include <tuple>

#include <CLI11.hpp>
#include <json.hpp>

#include "neurasim/compiler.hpp"
#include "neurasim/config.hpp"
#include "neurasim/engine.hpp"
#include "neurasim/errors.hpp"
#include "neurasim/isa.hpp"
#include "neurasim/sparse.hpp"

namespace neura::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Carries an exit code out of deeply nested command code.
struct Failure {
  ExitCode code;
  std::string message;
};

struct ConfigArgs {
  std::string preset = "tile4";
  std::string config;
  std::vector<std::string> sets;
  std::string mapping;
  std::string eviction;
  unsigned width = 0;  // 0 keeps the config's value
};

struct RunArgs {
  std::string a, b, x, w;
  bool gcn = false;
  ConfigArgs conf;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::uint64_t trace_interval = 1;
  std::string out;
};

void add_config_options(CLI::App* cmd, ConfigArgs& c) {
  cmd->add_option("--preset", c.preset, "tile4, tile16, tile64 or tile64-hbm256");
  cmd->add_option("--config", c.config, "key = value config file; overrides the preset field by field");
  cmd->add_option("--set", c.sets, "extra key=value override (repeatable)");
  cmd->add_option("--mapping", c.mapping, "RING, PRIME_MODULAR, RANDOM_TABLE, DRHM_LOWER or DRHM_UPPER");
  cmd->add_option("--eviction", c.eviction, "ROLLING or BARRIER");
  cmd->add_option("--width", c.width, "MMH tile width: 1, 2, 4 or 8");
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Failure{VALIDATION, "cannot open " + p.string()};
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Failure{VALIDATION, "cannot write " + p.string()};
  out << text;
}

std::string fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

TileConfig resolve_config(const ConfigArgs& c) {
  TileConfig cfg;
  if (!c.config.empty()) {
    cfg = parse_config("preset = " + c.preset + "\n" + read_text(c.config), c.config);
  } else {
    cfg = preset(c.preset);
  }
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError(kv, "expected key=value");
    apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!c.mapping.empty()) apply_setting(cfg, "mapping", c.mapping);
  if (!c.eviction.empty()) apply_setting(cfg, "eviction", c.eviction);
  if (c.width != 0) apply_setting(cfg, "mmh_width", std::to_string(c.width));
  cfg.validate();
  return cfg;
}

fs::path output_root(const std::string& requested, const std::string& name) {
  if (!requested.empty()) return requested;
  if (const char* env = std::getenv(kOutEnv); env != nullptr && *env != '\0') return fs::path(env) / name;
  return fs::path("neurasim_out") / name;
}

std::string run_name(const TileConfig& cfg, std::uint64_t seed) {
  return cfg.preset + "_" + std::string(to_string(cfg.mapping)) + "_" + std::string(to_string(cfg.eviction)) +
         "_w" + std::to_string(cfg.mmh_width) + "_s" + std::to_string(seed);
}

SparseMatrix load(const std::string& path, Layout layout = Layout::CSR) {
  if (path.empty()) throw Failure{USAGE, "missing matrix path"};
  return load_matrix_market(path, layout);
}

json input_entry(const std::string& path, const fs::path& dir, const std::string& copy) {
  const std::string bytes = read_text(path);
  write_text(dir / copy, bytes);
  return {{"path", path}, {"copy", copy}, {"fnv1a64", fnv1a64(bytes)}};
}

struct SimOutcome {
  RunResult result;
  bool oracle_match = false;
  json manifest;
};

// One simulated workload written to `dir`: config, output, metrics, manifest.
SimOutcome simulate(const CompiledWorkload& wl, const TileConfig& cfg, const RunArgs& ra,
                    const SparseMatrix& expected, const fs::path& dir, json inputs) {
  fs::create_directories(dir);
  SimOutcome o;
  try {
    o.result = run(wl, cfg, ra.seed, {ra.threads, ra.trace_interval});
  } catch (const IntegrityError& e) {
    throw Failure{INTEGRITY, std::string("integrity check failed: ") + e.what()};
  } catch (const DeadlockError& e) {
    throw Failure{INTEGRITY, std::string("deadlock: ") + e.what()};
  } catch (const SimulationFault& e) {
    throw Failure{INTEGRITY, std::string("simulation fault: ") + e.what()};
  }
  o.oracle_match = o.result.output == expected;
  write_text(dir / "config.txt", to_config_text(cfg));
  save_matrix_market(dir / "output.mtx", o.result.output);
  const auto files = write_metrics(o.result.metrics, dir);
  const auto& m = o.result.metrics;

  json& j = o.manifest;
  j["tool"] = "neurasim";
  j["preset"] = cfg.preset;
  j["mapping"] = std::string(to_string(cfg.mapping));
  j["eviction"] = std::string(to_string(cfg.eviction));
  j["mmh_width"] = cfg.mmh_width;
  j["seed"] = ra.seed;
  j["config"] = "config.txt";
  j["inputs"] = std::move(inputs);
  j["output"] = "output.mtx";
  j["metrics"] = files;
  j["total_cycles"] = m.total_cycles;
  j["oracle_match"] = o.oracle_match;
  j["conservation"] = m.haccs_emitted == m.expected_pp && m.evictions == m.expected_nnz &&
                      m.evicted_sum == m.hacc_data_sum;
  return o;
}

void finish_manifest(json& j, const fs::path& dir, std::ostream& out) {
  write_text(dir / "manifest.json", j.dump(2) + "\n");
  out << "wrote " << (dir / "manifest.json").string() << "\n";
}

void print_summary(const MetricsReport& m, bool match, std::ostream& out) {
  out << "cycles " << m.total_cycles << ", HACCs " << m.haccs_emitted << ", evictions " << m.evictions
      << ", mean MMH CPI " << m.mean_mmh_cpi << ", mean HACC CPI " << m.mean_hacc_cpi << ", oracle "
      << (match ? "match" : "MISMATCH") << "\n";
}

int cmd_run(const RunArgs& ra, std::ostream& out) {
  const TileConfig cfg = resolve_config(ra.conf);
  const fs::path dir = output_root(ra.out, (ra.gcn ? "gcn_" : "") + run_name(cfg, ra.seed));
  fs::create_directories(dir);

  if (!ra.gcn) {
    const auto a = load(ra.a);
    const auto b = load(ra.b);
    if (a.n_cols != b.n_rows) throw Failure{VALIDATION, "A is " + std::to_string(a.n_rows) + "x" +
                                                            std::to_string(a.n_cols) + " but B has " +
                                                            std::to_string(b.n_rows) + " rows"};
    const auto wl = compile_spgemm(a, b, cfg.mmh_width);
    json inputs;
    inputs["a"] = input_entry(ra.a, dir, "a.mtx");
    inputs["b"] = input_entry(ra.b, dir, "b.mtx");
    auto o = simulate(wl, cfg, ra, oracle_spgemm(a, b), dir, std::move(inputs));
    o.manifest["command"] = "run";
    o.manifest["rerun"] = "neurasim run --a a.mtx --b b.mtx --config config.txt --seed " + std::to_string(ra.seed) +
                          " --out .";
    finish_manifest(o.manifest, dir, out);
    print_summary(o.result.metrics, o.oracle_match, out);
    if (!o.manifest["conservation"].get<bool>()) throw Failure{INTEGRITY, "conservation check failed"};
    if (!o.oracle_match) throw Failure{INTEGRITY, "simulated output differs from the oracle"};
    return OK;
  }

  // GCN layer: aggregation A.X, then combination (A.X).W, then ReLU.
  const auto a = load(ra.a);
  const auto x = load(ra.x);
  const auto w = load(ra.w);
  if (a.n_cols != x.n_rows || x.n_cols != w.n_rows) throw Failure{VALIDATION, "A, X and W dimensions do not chain"};
  const auto [agg, comb] = compile_gcn_layer(a, x, w, cfg.mmh_width);
  const SparseMatrix p = oracle_spgemm(a, x);
  const SparseMatrix h_ref = relu(oracle_spgemm(p, w));

  json inputs;
  inputs["a"] = input_entry(ra.a, dir, "a.mtx");
  inputs["x"] = input_entry(ra.x, dir, "x.mtx");
  inputs["w"] = input_entry(ra.w, dir, "w.mtx");
  auto o1 = simulate(agg, cfg, ra, p, dir / "aggregate", {{"a", "../a.mtx"}, {"b", "../x.mtx"}});
  finish_manifest(o1.manifest, dir / "aggregate", out);
  print_summary(o1.result.metrics, o1.oracle_match, out);
  // The combination was compiled from the functional A.X; the simulated one must equal it.
  auto o2 = simulate(comb, cfg, ra, oracle_spgemm(p, w), dir / "combine", {{"a", "p"}, {"b", "../w.mtx"}});
  finish_manifest(o2.manifest, dir / "combine", out);
  print_summary(o2.result.metrics, o2.oracle_match, out);
  const SparseMatrix h = relu(o2.result.output);
  save_matrix_market(dir / "h.mtx", h);
  const bool match = o1.oracle_match && o2.oracle_match && h == h_ref;

  json j;
  j["tool"] = "neurasim";
  j["command"] = "run --gcn";
  j["preset"] = cfg.preset;
  j["seed"] = ra.seed;
  j["config"] = "config.txt";
  write_text(dir / "config.txt", to_config_text(cfg));
  j["inputs"] = std::move(inputs);
  j["stages"] = {"aggregate/manifest.json", "combine/manifest.json"};
  j["output"] = "h.mtx";
  j["total_cycles"] = o1.result.metrics.total_cycles + o2.result.metrics.total_cycles;
  j["oracle_match"] = match;
  j["rerun"] = "neurasim run --gcn --a a.mtx --x x.mtx --w w.mtx --config config.txt --seed " +
               std::to_string(ra.seed) + " --out .";
  finish_manifest(j, dir, out);
  if (!match) throw Failure{INTEGRITY, "GCN layer output differs from the oracle"};
  return OK;
}

struct SweepArgs {
  std::string a, b;
  ConfigArgs conf;
  std::vector<std::string> presets{"tile4", "tile16"};
  std::vector<std::string> mappings;
  std::vector<std::string> evictions{"ROLLING", "BARRIER"};
  std::uint64_t seed = 1;
  unsigned jobs = 1;
  std::string out;
};

struct SweepRow {
  std::string preset, mapping, eviction;
  RunArgs ra;
  int code = OK;
  std::string error;
  MetricsReport metrics;
  bool match = false;
};

int cmd_sweep(const SweepArgs& sa, std::ostream& out) {
  const fs::path root = output_root(sa.out, "sweep_s" + std::to_string(sa.seed));
  fs::create_directories(root);
  std::vector<std::string> mappings = sa.mappings;
  if (mappings.empty()) mappings.push_back(std::string(to_string(resolve_config(sa.conf).mapping)));

  // Canonical names first, so sorting and directory names do not depend on spelling.
  std::vector<SweepRow> rows;
  for (const auto& p : sa.presets) {
    for (const auto& mp : mappings) {
      for (const auto& ev : sa.evictions) {
        ConfigArgs c = sa.conf;
        c.preset = p;
        c.mapping = mp;
        c.eviction = ev;
        const TileConfig cfg = resolve_config(c);
        SweepRow r;
        r.preset = cfg.preset;
        r.mapping = std::string(to_string(cfg.mapping));
        r.eviction = std::string(to_string(cfg.eviction));
        r.ra.a = sa.a;
        r.ra.b = sa.b;
        r.ra.conf = c;
        r.ra.seed = sa.seed;
        r.ra.out = (root / (r.preset + "_" + r.mapping + "_" + r.eviction)).string();
        rows.push_back(std::move(r));
      }
    }
  }
  std::sort(rows.begin(), rows.end(), [](const SweepRow& x, const SweepRow& y) {
    return std::tie(x.preset, x.mapping, x.eviction) < std::tie(y.preset, y.mapping, y.eviction);
  });
  rows.erase(std::unique(rows.begin(), rows.end(),
                         [](const SweepRow& x, const SweepRow& y) {
                           return std::tie(x.preset, x.mapping, x.eviction) ==
                                  std::tie(y.preset, y.mapping, y.eviction);
                         }),
             rows.end());

  // Sub-runs write to disjoint directories; their console output is dropped.
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t i; !failed && (i = next++) < rows.size();) {
      SweepRow& r = rows[i];
      std::ostringstream sink;
      try {
        r.code = cmd_run(r.ra, sink);
      } catch (const Failure& f) {
        r.code = f.code;
        r.error = f.message;
      } catch (const std::exception& e) {
        r.code = VALIDATION;
        r.error = e.what();
      }
      if (r.code != OK) {
        failed = true;
        continue;
      }
      const json man = json::parse(read_text(fs::path(r.ra.out) / "manifest.json"));
      r.match = man["oracle_match"].get<bool>();
      const json met = json::parse(read_text(fs::path(r.ra.out) / "metrics.json"));
      r.metrics.total_cycles = met["total_cycles"].get<std::uint64_t>();
      r.metrics.mean_mmh_cpi = met["mean_mmh_cpi"].get<double>();
      r.metrics.mean_hacc_cpi = met["mean_hacc_cpi"].get<double>();
      r.metrics.mean_hashpad_occupancy = met["mean_hashpad_occupancy"].get<double>();
      r.metrics.peak_hashpad_occupancy = met["peak_hashpad_occupancy"].get<std::uint64_t>();
      r.metrics.evictions = met["evictions"].get<std::uint64_t>();
      r.metrics.haccs_emitted = met["haccs_emitted"].get<std::uint64_t>();
      r.metrics.gops = met["gops"].get<double>();
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < std::max(1u, sa.jobs); ++t) pool.emplace_back(worker);
    worker();
  }
  for (const auto& r : rows) {
    if (r.code != OK && !r.error.empty()) {
      throw Failure{static_cast<ExitCode>(r.code), r.preset + "/" + r.mapping + "/" + r.eviction + ": " + r.error};
    }
  }

  std::ostringstream csv;
  csv << "preset,mapping,eviction,total_cycles,mean_mmh_cpi,mean_hacc_cpi,mean_hashpad_occupancy,"
         "peak_hashpad_occupancy,haccs,evictions,gops,oracle_match,dir\n";
  json runs = json::array();
  for (const auto& r : rows) {
    const std::string dir = fs::path(r.ra.out).filename().string();
    csv << r.preset << "," << r.mapping << "," << r.eviction << "," << r.metrics.total_cycles << ","
        << json(r.metrics.mean_mmh_cpi).dump() << "," << json(r.metrics.mean_hacc_cpi).dump() << ","
        << json(r.metrics.mean_hashpad_occupancy).dump() << "," << r.metrics.peak_hashpad_occupancy << ","
        << r.metrics.haccs_emitted << "," << r.metrics.evictions << "," << json(r.metrics.gops).dump() << ","
        << (r.match ? "true" : "false") << "," << dir << "\n";
    runs.push_back({{"preset", r.preset},
                    {"mapping", r.mapping},
                    {"eviction", r.eviction},
                    {"manifest", dir + "/manifest.json"}});
  }
  write_text(root / "sweep.csv", csv.str());
  json j;
  j["tool"] = "neurasim";
  j["command"] = "sweep";
  j["seed"] = sa.seed;
  j["inputs"] = {{"a", {{"path", sa.a}, {"fnv1a64", fnv1a64(read_text(sa.a))}}},
                 {"b", {{"path", sa.b}, {"fnv1a64", fnv1a64(read_text(sa.b))}}}};
  j["csv"] = "sweep.csv";
  j["runs"] = std::move(runs);
  finish_manifest(j, root, out);
  out << "wrote " << (root / "sweep.csv").string() << " (" << rows.size() << " runs)\n";
  return OK;
}

struct CompileArgs {
  std::string a, b;
  unsigned width = 4;
  std::string out;
};

int cmd_compile(const CompileArgs& ca, std::ostream& out) {
  const auto a = load(ca.a);
  const auto b = load(ca.b);
  if (a.n_cols != b.n_rows) throw Failure{VALIDATION, "A and B dimensions do not chain"};
  const auto wl = compile_spgemm(a, b, static_cast<std::uint8_t>(ca.width));
  const fs::path dir = output_root(ca.out, "compile_w" + std::to_string(ca.width));
  fs::create_directories(dir);
  write_image(dir / "image.ncim", wl.image, wl.mmh_width);
  json j;
  j["tool"] = "neurasim";
  j["command"] = "compile";
  j["inputs"] = {{"a", {{"path", ca.a}, {"fnv1a64", fnv1a64(read_text(ca.a))}}},
                 {"b", {{"path", ca.b}, {"fnv1a64", fnv1a64(read_text(ca.b))}}}};
  j["mmh_width"] = wl.mmh_width;
  j["instructions"] = wl.instructions.size();
  j["row_blocks"] = wl.row_block_count();
  j["partial_products"] = wl.expected_pp_count;
  j["output_nnz"] = wl.expected_output_nnz;
  j["image"] = "image.ncim";
  if (wl.mmh_width == 4) {
    std::vector<Instruction> stream(wl.instructions.begin(), wl.instructions.end());
    write_stream(dir / "program.ncis", stream);
    j["program"] = "program.ncis";
  } else {
    j["program"] = nullptr;  // only MMH4 has a binary encoding
  }
  finish_manifest(j, dir, out);
  out << wl.instructions.size() << " MMH" << ca.width << " instructions, " << wl.row_block_count()
      << " row blocks, " << wl.expected_pp_count << " partial products, " << wl.expected_output_nnz
      << " output nonzeros\n";
  return OK;
}

struct BloatArgs {
  std::vector<std::string> paths;
  std::string b;
};

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

// Columns: dataset, node count, edge count, sparsity %, bloat %.
int cmd_bloat(const BloatArgs& ba, std::ostream& out) {
  out << "dataset,nodes,edges,sparsity_percent,bloat_percent\n";
  for (const auto& path : ba.paths) {
    const auto a = load(path);
    const auto b = ba.b.empty() ? a : load(ba.b);
    if (a.n_cols != b.n_rows) throw Failure{VALIDATION, path + ": operands do not chain"};
    const BloatReport r = bloat_analysis(a, b);
    const double cells = static_cast<double>(a.n_rows) * static_cast<double>(a.n_cols);
    const double sparsity = cells == 0 ? 100.0 : 100.0 * (1.0 - static_cast<double>(a.nnz()) / cells);
    out << fs::path(path).stem().string() << "," << a.n_rows << "," << a.nnz() << "," << fixed(sparsity, 4) << ","
        << (r.defined ? fixed(r.bloat_percent, 4) : std::string("undefined")) << "\n";
  }
  return OK;
}

}  // namespace

int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"NeuraChip simulator: compile, run, sweep and bloat analysis", "neurasim"};
  app.require_subcommand(1);

  CompileArgs ca;
  auto* compile = app.add_subcommand("compile", "lower A.B to an MMH stream and memory image");
  compile->add_option("--a", ca.a, "A (Matrix Market)")->required();
  compile->add_option("--b", ca.b, "B (Matrix Market)")->required();
  compile->add_option("--width", ca.width, "MMH tile width");
  compile->add_option("--out", ca.out, "output directory");

  RunArgs ra;
  auto* runc = app.add_subcommand("run", "simulate A.B (or a GCN layer) and check it against the oracle");
  runc->add_option("--a", ra.a, "A, or the graph with --gcn")->required();
  runc->add_option("--b", ra.b, "B");
  runc->add_flag("--gcn", ra.gcn, "GCN layer: ReLU((A.X).W)");
  runc->add_option("--x", ra.x, "node features (with --gcn)");
  runc->add_option("--w", ra.w, "layer weights (with --gcn)");
  add_config_options(runc, ra.conf);
  runc->add_option("--seed", ra.seed, "mapping seed");
  runc->add_option("--threads", ra.threads, "phase-1 worker threads");
  runc->add_option("--trace-interval", ra.trace_interval, "trace sample period in cycles, 0 for none");
  runc->add_option("--out", ra.out, "run directory");

  SweepArgs sa;
  auto* sweep = app.add_subcommand("sweep", "presets x mappings x eviction modes on one workload");
  sweep->add_option("--a", sa.a, "A")->required();
  sweep->add_option("--b", sa.b, "B")->required();
  sweep->add_option("--presets", sa.presets, "presets")->delimiter(',');
  sweep->add_option("--mappings", sa.mappings, "mapping policies")->delimiter(',');
  sweep->add_option("--evictions", sa.evictions, "eviction modes")->delimiter(',');
  sweep->add_option("--seed", sa.seed, "mapping seed");
  sweep->add_option("--jobs", sa.jobs, "sub-runs in parallel");
  sweep->add_option("--out", sa.out, "sweep directory");
  sweep->add_option("--config", sa.conf.config, "config file applied to every preset");
  sweep->add_option("--set", sa.conf.sets, "extra key=value override (repeatable)");
  sweep->add_option("--width", sa.conf.width, "MMH tile width");

  BloatArgs ba;
  auto* bloat = app.add_subcommand("bloat", "partial-product bloat of A.A (or A.B) per dataset");
  bloat->add_option("paths", ba.paths, "Matrix Market files")->required();
  bloat->add_option("--b", ba.b, "second operand instead of A itself");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? OK : USAGE;
  }

  try {
    if (*compile) return cmd_compile(ca, out);
    if (*runc) {
      if (ra.gcn && (ra.x.empty() || ra.w.empty())) throw Failure{USAGE, "--gcn needs --x and --w"};
      if (!ra.gcn && ra.b.empty()) throw Failure{USAGE, "run needs --b (or --gcn)"};
      return cmd_run(ra, out);
    }
    if (*sweep) return cmd_sweep(sa, out);
    if (*bloat) return cmd_bloat(ba, out);
  } catch (const Failure& f) {
    err << "neurasim: " << f.message << "\n";
    return f.code;
  } catch (const ConfigError& e) {
    err << "neurasim: config error: " << e.what() << "\n";
    return VALIDATION;
  } catch (const ParseError& e) {
    err << "neurasim: parse error: " << e.what() << "\n";
    return VALIDATION;
  } catch (const CompileError& e) {
    err << "neurasim: compile error: " << e.what() << "\n";
    return VALIDATION;
  } catch (const std::exception& e) {
    err << "neurasim: " << e.what() << "\n";
    return VALIDATION;
  }
  return USAGE;
}

}  // namespace neura::cli
