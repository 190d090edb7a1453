// Acceptance suite: one [PASS]/[FAIL] line per criterion.
//
//   acceptance                 run everything; exit 1 if any criterion fails
//   acceptance --only 3,4      run a subset
//   acceptance --allow-fail 3  exit 0 when the failures are exactly within the list
//
// Criteria 1, 2, 7 and 9 share one sweep of simulations.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "neurasim/cli.hpp"
#include "neurasim/compiler.hpp"
#include "neurasim/engine.hpp"
#include "neurasim/errors.hpp"
#include "neurasim/mapping.hpp"
#include "test_util.hpp"

using namespace neura;
namespace fs = std::filesystem;

namespace {

// ---- pinned parameters and tolerances -------------------------------------

constexpr int kSuitePairs = 50;
constexpr std::uint32_t kMinDim = 4;
constexpr std::uint32_t kMaxDim = 64;
constexpr double kMinDensity = 0.05;
constexpr double kMaxDensity = 1.0;
constexpr std::uint64_t kSuiteSeed = 2024;
constexpr double kSuiteBudgetSec = 300.0;  // criteria 1 and 7

constexpr double kHandBloat = 14.2857;
constexpr double kHandBloatTol = 0.0001;
constexpr double kFacebookBloat = 2872.80;
constexpr double kFacebookBloatTol = 0.01;

constexpr std::uint32_t kMapTargets = 32;
constexpr std::uint32_t kMapBlocks = 64;  // row blocks in each adversarial stream, at least
constexpr double kDrhmMaxOverMean = 2.0;
constexpr double kModularMinOverMean = 8.0;
constexpr std::uint64_t kMapSeed = 7;
constexpr double kMapBudgetSec = 10.0;

constexpr std::uint32_t kEvictDim = 16;
constexpr double kEvictBudgetSec = 60.0;

constexpr std::uint32_t kWidthDim = 32;
constexpr double kWidthBudgetSec = 120.0;

constexpr int kRepeats = 3;
constexpr unsigned kManyThreads = 4;

constexpr std::uint32_t kGcnFeatures = 16;
constexpr std::uint32_t kGcnHidden = 8;
constexpr double kGcnBudgetSec = 30.0;

// ---------------------------------------------------------------------------

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

const std::vector<std::string> kPresets{"tile4", "tile16", "tile64", "tile64-hbm256"};
const std::vector<MappingKind> kMappings{MappingKind::RING, MappingKind::PRIME_MODULAR, MappingKind::RANDOM_TABLE,
                                         MappingKind::DRHM_LOWER, MappingKind::DRHM_UPPER};
const std::vector<EvictionMode> kModes{EvictionMode::ROLLING, EvictionMode::BARRIER};

struct SuiteRun {
  int pair = 0;
  std::string preset;
  MappingKind mapping{};
  EvictionMode mode{};
  bool ok = false;  // finished without an exception
  std::string error;
  bool output_match = false;
  bool conserved = false;
  std::uint64_t cycles = 0;
  RouterStats net;
};

struct Suite {
  std::vector<SuiteRun> runs;
  double seconds = 0;
  bool ran = false;
};

// Every pair against every (preset, mapping, mode). Conservation is checked
// against counts computed independently of the compiler.
const Suite& suite() {
  static Suite s;
  if (s.ran) return s;
  s.ran = true;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(kSuiteSeed);
  std::uniform_int_distribution<std::uint32_t> dim(kMinDim, kMaxDim);
  std::uniform_real_distribution<double> dens(kMinDensity, kMaxDensity);
  for (int k = 0; k < kSuitePairs; ++k) {
    const std::uint32_t m = dim(rng), inner = dim(rng), n = dim(rng);
    const double d = dens(rng);
    const auto a = test::random_matrix(m, inner, d, rng(), true);
    const auto b = test::random_matrix(inner, n, d, rng(), true);
    const auto want = oracle_spgemm(a, b);
    const BloatReport counts = bloat_analysis(a, b);
    long double payload = 0;  // sum of all partial products
    {
      const auto bc = b;
      for (const auto& t : to_triplets(a)) {
        for (Offset p = bc.offsets[t.col]; p < bc.offsets[t.col + 1]; ++p) payload += t.value * bc.values[p];
      }
    }
    const auto wl = compile_spgemm(a, b, 4);
    for (const auto& p : kPresets) {
      for (auto mk : kMappings) {
        for (auto mode : kModes) {
          SuiteRun r;
          r.pair = k;
          r.preset = p;
          r.mapping = mk;
          r.mode = mode;
          TileConfig cfg = preset(p);
          cfg.mapping = mk;
          cfg.eviction = mode;
          try {
            const auto res = run(wl, cfg, static_cast<std::uint64_t>(k), {1, 0});
            const auto& mt = res.metrics;
            r.ok = true;
            r.output_match = res.output == want;
            r.conserved = mt.haccs_emitted == counts.pp_interim && mt.evictions == want.nnz() &&
                          mt.evicted_sum == mt.hacc_data_sum &&
                          mt.hacc_data_sum == static_cast<double>(payload);
            r.cycles = mt.total_cycles;
            r.net = mt.network;
          } catch (const std::exception& e) {
            r.error = e.what();
          }
          s.runs.push_back(std::move(r));
        }
      }
    }
  }
  s.seconds = seconds_since(t0);
  return s;
}

std::string describe(const SuiteRun& r) {
  return "pair " + std::to_string(r.pair) + " " + r.preset + "/" + std::string(to_string(r.mapping)) + "/" +
         std::string(to_string(r.mode));
}

Verdict criterion1() {
  const Suite& s = suite();
  int bad = 0;
  std::string first;
  for (const auto& r : s.runs) {
    if (r.ok && r.output_match) continue;
    if (bad++ == 0) first = describe(r) + (r.ok ? ": output differs" : ": " + r.error);
  }
  const bool fast = s.seconds < kSuiteBudgetSec;
  std::string d = std::to_string(s.runs.size() - bad) + "/" + std::to_string(s.runs.size()) + " runs equal the oracle (" +
                  std::to_string(kSuitePairs) + " pairs x " + std::to_string(kPresets.size() * kMappings.size() * 2) +
                  " combos) in " + fmt("%.1f", s.seconds) + " s (budget " + fmt("%.0f", kSuiteBudgetSec) + " s)";
  if (bad) d += "; first failure " + first;
  return {bad == 0 && fast, d};
}

Verdict criterion2() {
  const Suite& s = suite();
  int bad = 0;
  std::string first;
  for (const auto& r : s.runs) {
    if (r.ok && r.conserved) continue;
    if (bad++ == 0) first = describe(r) + (r.ok ? "" : ": " + r.error);
  }
  std::string d = std::to_string(s.runs.size() - bad) + "/" + std::to_string(s.runs.size()) +
                  " runs: HACCs = pp count, evictions = oracle nnz, evicted sum = HACC payload sum";
  if (bad) d += "; first failure " + first;
  return {bad == 0, d};
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("neurasim_acceptance_" + std::to_string(::getpid())) / name;
  fs::create_directories(p);
  return p;
}

// Parses the bloat column of the first data row printed by `neurasim bloat`.
double bloat_from_cli(const std::vector<std::string>& args, std::string& raw) {
  std::ostringstream out, err;
  const int code = cli::main(args, out, err);
  raw = out.str();
  if (code != 0) return std::nan("");
  std::istringstream lines(raw);
  std::string line;
  std::getline(lines, line);
  std::getline(lines, line);
  return std::stod(line.substr(line.rfind(',') + 1));
}

Verdict criterion3() {
  const fs::path dir = scratch_dir("bloat");
  save_matrix_market(dir / "hand_a.mtx", test::hand_a());
  save_matrix_market(dir / "hand_b.mtx", test::hand_b());
  std::string raw;
  const double got = bloat_from_cli({"bloat", (dir / "hand_a.mtx").string(), "--b", (dir / "hand_b.mtx").string()}, raw);
  bool pass = std::abs(got - kHandBloat) <= kHandBloatTol;
  std::string d = "hand example bloat " + fmt("%.4f", got) + "% (want " + fmt("%.4f", kHandBloat) + " +- " +
                  fmt("%.4f", kHandBloatTol) + ")";
  // Optional dataset check: only when the file has been downloaded.
  fs::path fb;
  if (const char* env = std::getenv("NEURASIM_FACEBOOK")) fb = env;
  if (fb.empty()) fb = fs::path(NEURASIM_SOURCE_DIR) / "data" / "facebook_combined.mtx";
  if (fs::exists(fb)) {
    const double f = bloat_from_cli({"bloat", fb.string()}, raw);
    pass = pass && std::abs(f - kFacebookBloat) <= kFacebookBloatTol;
    d += "; facebook " + fmt("%.2f", f) + "% (want " + fmt("%.2f", kFacebookBloat) + ")";
  } else {
    d += "; facebook dataset not present, skipped";
  }
  return {pass, d};
}

double max_over_mean(const std::vector<std::uint64_t>& h) {
  std::uint64_t total = 0, mx = 0;
  for (auto v : h) {
    total += v;
    mx = std::max(mx, v);
  }
  return total == 0 ? 0.0 : static_cast<double>(mx) * static_cast<double>(h.size()) / static_cast<double>(total);
}

Verdict criterion4() {
  const auto t0 = Clock::now();
  // Three adversarial streams over at least kMapBlocks row blocks of 4 output rows.
  const std::uint32_t cols = 64;
  std::vector<TagEvent> stride, column, dense;
  for (std::uint32_t i = 0; i < kMapBlocks * 256; ++i) stride.push_back({i * kMapTargets, i / 256});
  for (std::uint32_t r = 0; r < kMapBlocks * 4 * 4; ++r) column.push_back({r * cols + 5, r / 4});
  for (std::uint32_t r = 0; r < kMapBlocks * 4; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) dense.push_back({r * cols + c, r / 4});
  }
  auto load = [](MappingKind kind, const std::vector<TagEvent>& s) {
    MappingPolicy p(kind, kMapTargets, 16, kMapSeed);
    std::uint32_t blocks = 0;
    for (const auto& e : s) blocks = std::max(blocks, e.row_block + 1);
    for (std::uint32_t b = 0; b < blocks; ++b) p.reseed(b);
    return max_over_mean(heatmap(p, s));
  };
  const double d_stride = load(MappingKind::DRHM_LOWER, stride);
  const double d_column = load(MappingKind::DRHM_LOWER, column);
  const double d_dense = load(MappingKind::DRHM_LOWER, dense);
  const double pm_stride = load(MappingKind::PRIME_MODULAR, stride);
  const double secs = seconds_since(t0);
  const bool pass = d_stride <= kDrhmMaxOverMean && d_column <= kDrhmMaxOverMean && d_dense <= kDrhmMaxOverMean &&
                    pm_stride >= kModularMinOverMean && secs < kMapBudgetSec;
  return {pass, "DRHM_LOWER max/mean: stride " + fmt("%.2f", d_stride) + ", single-column " + fmt("%.2f", d_column) +
                    ", dense " + fmt("%.2f", d_dense) + " (want <= " + fmt("%.1f", kDrhmMaxOverMean) +
                    "); PRIME_MODULAR stride " + fmt("%.2f", pm_stride) + " (want >= " +
                    fmt("%.1f", kModularMinOverMean) + "); " + fmt("%.2f", secs) + " s"};
}

Verdict criterion5() {
  const auto t0 = Clock::now();
  const auto a = test::random_matrix(kEvictDim, kEvictDim, 1.0, 51);
  const auto b = test::random_matrix(kEvictDim, kEvictDim, 1.0, 52);
  const auto wl = compile_spgemm(a, b, 4);
  TileConfig cfg = preset("tile16");
  cfg.eviction = EvictionMode::ROLLING;
  const auto roll = run(wl, cfg, 1).metrics;
  cfg.eviction = EvictionMode::BARRIER;
  const auto bar = run(wl, cfg, 1).metrics;
  const double secs = seconds_since(t0);
  const bool pass = roll.mean_hacc_cpi < bar.mean_hacc_cpi &&
                    roll.mean_hashpad_occupancy < bar.mean_hashpad_occupancy && secs < kEvictBudgetSec;
  return {pass, "mean HACC completion " + fmt("%.2f", roll.mean_hacc_cpi) + " vs " + fmt("%.2f", bar.mean_hacc_cpi) +
                    " cycles, mean occupancy " + fmt("%.2f", roll.mean_hashpad_occupancy) + " vs " +
                    fmt("%.2f", bar.mean_hashpad_occupancy) + " lines (ROLLING vs BARRIER); " + fmt("%.1f", secs) +
                    " s"};
}

Verdict criterion6() {
  const auto t0 = Clock::now();
  const auto a = test::random_matrix(kWidthDim, kWidthDim, 1.0, 61);
  const auto b = test::random_matrix(kWidthDim, kWidthDim, 1.0, 62);
  std::vector<double> cpi;
  for (std::uint8_t w : {1, 2, 4, 8}) {
    TileConfig cfg = preset("tile16");
    cfg.mmh_width = w;
    cpi.push_back(run(compile_spgemm(a, b, w), cfg, 1).metrics.mean_mmh_cpi);
  }
  const double secs = seconds_since(t0);
  bool inc = true;
  for (std::size_t i = 1; i < cpi.size(); ++i) inc = inc && cpi[i] > cpi[i - 1];
  return {inc && secs < kWidthBudgetSec, "mean MMH CPI at widths 1/2/4/8: " + fmt("%.2f", cpi[0]) + " / " +
                                             fmt("%.2f", cpi[1]) + " / " + fmt("%.2f", cpi[2]) + " / " +
                                             fmt("%.2f", cpi[3]) + "; " + fmt("%.1f", secs) + " s"};
}

Verdict criterion7() {
  const Suite& s = suite();
  // key: pair, mapping, mode
  std::map<std::tuple<int, int, int>, std::map<std::string, std::uint64_t>> cycles;
  for (const auto& r : s.runs) {
    if (r.ok) cycles[{r.pair, static_cast<int>(r.mapping), static_cast<int>(r.mode)}][r.preset] = r.cycles;
  }
  int checked = 0, bad16 = 0, badbw = 0;
  std::string first;
  for (const auto& [key, c] : cycles) {
    if (c.count("tile4") && c.count("tile16")) {
      ++checked;
      if (c.at("tile16") > c.at("tile4") && bad16++ == 0 && first.empty()) {
        first = "pair " + std::to_string(std::get<0>(key)) + ": tile16 " + std::to_string(c.at("tile16")) +
                " > tile4 " + std::to_string(c.at("tile4"));
      }
    }
    if (c.count("tile64") && c.count("tile64-hbm256")) {
      ++checked;
      if (c.at("tile64-hbm256") > c.at("tile64") && badbw++ == 0 && first.empty()) {
        first = "pair " + std::to_string(std::get<0>(key)) + ": 256 GB/s " + std::to_string(c.at("tile64-hbm256")) +
                " > 128 GB/s " + std::to_string(c.at("tile64"));
      }
    }
  }
  const bool pass = bad16 == 0 && badbw == 0 && checked > 0 && s.seconds < kSuiteBudgetSec;
  std::string d = std::to_string(checked) + " comparisons: tile16 > tile4 in " + std::to_string(bad16) +
                  ", 256 GB/s > 128 GB/s in " + std::to_string(badbw) + " (shared sweep, " + fmt("%.1f", s.seconds) +
                  " s)";
  if (!first.empty()) d += "; first: " + first;
  return {pass, d};
}

std::map<std::string, std::string> metric_files(const MetricsReport& m, const fs::path& dir) {
  fs::create_directories(dir);
  std::map<std::string, std::string> out;
  for (const auto& name : write_metrics(m, dir)) {
    std::ifstream in(dir / name, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    out[name] = s.str();
  }
  return out;
}

Verdict criterion8() {
  struct Case {
    SparseMatrix a, b;
    const char* preset;
    MappingKind mapping;
    EvictionMode mode;
  };
  const std::vector<Case> cases{
      {test::random_matrix(40, 30, 0.3, 81, true), test::random_matrix(30, 50, 0.3, 82, true), "tile16",
       MappingKind::DRHM_LOWER, EvictionMode::ROLLING},
      {test::random_matrix(24, 24, 0.8, 83), test::random_matrix(24, 24, 0.8, 84), "tile64",
       MappingKind::RANDOM_TABLE, EvictionMode::BARRIER},
      {test::random_matrix(33, 17, 0.5, 85), test::random_matrix(17, 20, 0.5, 86), "tile4", MappingKind::RING,
       EvictionMode::ROLLING},
  };
  const fs::path root = scratch_dir("determinism");
  int runs = 0, diffs = 0;
  std::string first;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const auto& cs = cases[c];
    const auto wl = compile_spgemm(cs.a, cs.b, 4);
    TileConfig cfg = preset(cs.preset);
    cfg.mapping = cs.mapping;
    cfg.eviction = cs.mode;
    std::map<std::string, std::string> ref;
    for (int rep = 0; rep <= kRepeats; ++rep) {
      const unsigned threads = rep < kRepeats ? 1 : kManyThreads;
      const auto files = metric_files(run(wl, cfg, 99, {threads, 1}).metrics,
                                      root / ("case" + std::to_string(c) + "_rep" + std::to_string(rep)));
      ++runs;
      if (rep == 0) {
        ref = files;
      } else if (files != ref) {
        if (diffs++ == 0) first = "case " + std::to_string(c) + " run " + std::to_string(rep);
      }
    }
  }
  std::string d = std::to_string(cases.size()) + " workloads x (" + std::to_string(kRepeats) + " repeats + " +
                  std::to_string(kManyThreads) + " threads): " + std::to_string(diffs) + " differing metric sets";
  if (diffs) d += "; first " + first;
  return {diffs == 0, d};
}

Verdict criterion9() {
  const Suite& s = suite();
  std::uint64_t packets = 0;
  int lost = 0, stuck = 0, early = 0;
  for (const auto& r : s.runs) {
    if (!r.ok) {
      if (r.error.find("no progress") != std::string::npos) ++stuck;
      continue;
    }
    packets += r.net.delivered;
    if (r.net.injected != r.net.delivered) ++lost;
    if (r.net.latency_violations != 0) ++early;
  }
  return {lost == 0 && stuck == 0 && early == 0 && packets > 0,
          std::to_string(packets) + " packets over " + std::to_string(s.runs.size()) + " runs: " +
              std::to_string(lost) + " runs lost packets, " + std::to_string(stuck) + " watchdog stops, " +
              std::to_string(early) + " runs beat the minimal-hop latency bound (every packet checked)"};
}

SparseMatrix karate_club() {
  static const std::pair<int, int> edges[] = {
      {0, 1},   {0, 2},   {0, 3},   {0, 4},   {0, 5},   {0, 6},   {0, 7},   {0, 8},   {0, 10},  {0, 11},
      {0, 12},  {0, 13},  {0, 17},  {0, 19},  {0, 21},  {0, 31},  {1, 2},   {1, 3},   {1, 7},   {1, 13},
      {1, 17},  {1, 19},  {1, 21},  {1, 30},  {2, 3},   {2, 7},   {2, 8},   {2, 9},   {2, 13},  {2, 27},
      {2, 28},  {2, 32},  {3, 7},   {3, 12},  {3, 13},  {4, 6},   {4, 10},  {5, 6},   {5, 10},  {5, 16},
      {6, 16},  {8, 30},  {8, 32},  {8, 33},  {9, 33},  {13, 33}, {14, 32}, {14, 33}, {15, 32}, {15, 33},
      {18, 32}, {18, 33}, {19, 33}, {20, 32}, {20, 33}, {22, 32}, {22, 33}, {23, 25}, {23, 27}, {23, 29},
      {23, 32}, {23, 33}, {24, 25}, {24, 27}, {24, 31}, {25, 31}, {26, 29}, {26, 33}, {27, 33}, {28, 31},
      {28, 33}, {29, 32}, {29, 33}, {30, 32}, {30, 33}, {31, 32}, {31, 33}, {32, 33}};
  std::vector<Triplet> t;
  for (auto [u, v] : edges) {
    t.push_back({static_cast<Index>(u), static_cast<Index>(v), 1.0});
    t.push_back({static_cast<Index>(v), static_cast<Index>(u), 1.0});
  }
  for (Index i = 0; i < 34; ++i) t.push_back({i, i, 1.0});  // self loops, A + I
  return SparseMatrix::from_triplets(34, 34, Layout::CSR, std::move(t));
}

Verdict criterion10() {
  const auto t0 = Clock::now();
  const auto a = karate_club();
  const auto x = test::random_matrix(34, kGcnFeatures, 0.5, 101, true);
  const auto w = test::random_matrix(kGcnFeatures, kGcnHidden, 0.7, 102, true);
  const auto agg = compile_gcn_layer(a, x, w, 4).first;
  const TileConfig cfg = preset("tile16");
  const auto p_sim = run(agg, cfg, 3).output;
  // the combination is fed the simulated aggregation
  const auto comb_sim = compile_spgemm(p_sim, w, 4);
  const auto h_sim = relu(run(comb_sim, cfg, 3).output);
  const auto h_ref = relu(oracle_spgemm(oracle_spgemm(a, x), w));
  bool negatives = false;  // ReLU must have had something to do
  for (double v : oracle_spgemm(oracle_spgemm(a, x), w).values) negatives = negatives || v < 0;
  const double secs = seconds_since(t0);
  const bool match = h_sim == h_ref && p_sim == oracle_spgemm(a, x);
  return {match && negatives && secs < kGcnBudgetSec,
          "34-node graph, " + std::to_string(kGcnFeatures) + " -> " + std::to_string(kGcnHidden) +
              " features: ReLU((A.X).W) " + (match ? "equals" : "differs from") + " the oracle (" +
              std::to_string(h_ref.nnz()) + " nonzeros); " + fmt("%.1f", secs) + " s"};
}

std::set<int> parse_list(const std::string& s) {
  std::set<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.insert(std::stoi(item));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only, allowed;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      only = parse_list(argv[++i]);
    } else if (arg == "--allow-fail" && i + 1 < argc) {
      allowed = parse_list(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: acceptance [--only 1,2,...] [--allow-fail 3,...]\n");
      return 2;
    }
  }
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"oracle equivalence", criterion1},  {"conservation", criterion2},
      {"bloat reproduction", criterion3},  {"DRHM uniformity", criterion4},
      {"eviction comparison", criterion5}, {"MMH width trend", criterion6},
      {"resource monotonicity", criterion7}, {"determinism", criterion8},
      {"NoC soundness", criterion9},       {"GCN layer", criterion10},
  };
  std::set<int> failed;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) failed.insert(id);
    std::printf("[%s] %d. %s: %s\n", v.pass ? "PASS" : "FAIL", id, criteria[i].first, v.detail.c_str());
    std::fflush(stdout);
  }
  fs::remove_all(fs::temp_directory_path() / ("neurasim_acceptance_" + std::to_string(::getpid())));
  std::printf("%zu failed", failed.size());
  if (!allowed.empty()) {
    std::printf(" (allowed:");
    for (int a : allowed) std::printf(" %d", a);
    std::printf(")");
  }
  std::printf("\n");
  const bool unexpected = std::any_of(failed.begin(), failed.end(), [&](int f) { return !allowed.count(f); });
  return unexpected ? 1 : 0;
}
