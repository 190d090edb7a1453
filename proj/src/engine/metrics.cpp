#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "neurasim/engine.hpp"

namespace neura {

namespace {

using json = nlohmann::ordered_json;

json histogram_json(const Histogram& h) {
  json out = json::array();
  for (auto [v, c] : h) out.push_back({v, c});
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string histogram_csv(const Histogram& h) {
  std::string s = "cpi,count\n";
  for (auto [v, c] : h) s += std::to_string(v) + "," + std::to_string(c) + "\n";
  return s;
}

}  // namespace

std::string metrics_json(const MetricsReport& m) {
  json j;
  j["preset"] = m.preset;
  j["mapping"] = m.mapping;
  j["eviction"] = m.eviction;
  j["mmh_width"] = m.mmh_width;
  j["seed"] = m.seed;
  j["output_rows"] = m.output_rows;
  j["output_cols"] = m.output_cols;
  j["instructions"] = m.instructions;
  j["row_blocks"] = m.row_blocks;
  j["total_cycles"] = m.total_cycles;
  j["expected_pp"] = m.expected_pp;
  j["expected_nnz"] = m.expected_nnz;
  j["haccs_emitted"] = m.haccs_emitted;
  j["haccs_received"] = m.haccs_received;
  j["evictions"] = m.evictions;
  j["forced_evictions"] = m.forced_evictions;
  j["writes_landed"] = m.writes_landed;
  j["hacc_data_sum"] = m.hacc_data_sum;
  j["evicted_sum"] = m.evicted_sum;
  j["frequency_ghz"] = m.frequency_ghz;
  j["gops"] = m.gops;
  j["mean_mmh_cpi"] = m.mean_mmh_cpi;
  j["mean_hacc_cpi"] = m.mean_hacc_cpi;
  j["peak_hashpad_occupancy"] = m.peak_hashpad_occupancy;
  j["mean_hashpad_occupancy"] = m.mean_hashpad_occupancy;
  j["engine_stalls"] = m.engine_stalls;
  j["probe_cycles"] = m.probe_cycles;
  j["register_stalls"] = m.register_stalls;
  j["dispatch_holds"] = m.dispatch_holds;
  j["peak_mem_inflight"] = m.peak_mem_inflight;
  j["network"] = {{"injected", m.network.injected},
                  {"delivered", m.network.delivered},
                  {"forwarded", m.network.forwarded},
                  {"blocked", m.network.blocked},
                  {"escaped", m.network.escaped},
                  {"latency_sum", m.network.latency_sum},
                  {"latency_max", m.network.latency_max},
                  {"latency_violations", m.network.latency_violations}};
  json ctrl = json::array();
  for (const auto& c : m.controllers) {
    ctrl.push_back({{"reads", c.reads},
                    {"writes", c.writes},
                    {"transactions", c.transactions},
                    {"served_bytes", c.served_bytes},
                    {"max_window_bytes", c.max_window_bytes},
                    {"adjacent_picks", c.adjacent_picks}});
  }
  j["controllers"] = std::move(ctrl);
  json act = json::object();
  for (const auto& a : m.activity) act[a.name] = {{"busy", a.busy}, {"stall", a.stall}, {"idle", a.idle}};
  j["activity"] = std::move(act);
  j["multiplications"] = m.multiplications;
  j["accumulations"] = m.accumulations;
  j["cpi_mmh"] = histogram_json(m.mmh_cpi);
  j["cpi_hacc"] = histogram_json(m.hacc_cpi);
  return j.dump(2) + "\n";
}

std::vector<std::string> write_metrics(const MetricsReport& m, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  auto put = [&](const std::string& name, const std::string& text) {
    write_file(dir / name, text);
    files.push_back(name);
  };
  put("metrics.json", metrics_json(m));
  put("cpi_mmh.csv", histogram_csv(m.mmh_cpi));
  put("cpi_hacc.csv", histogram_csv(m.hacc_cpi));

  std::string t = "cycle,dispatched,haccs_emitted,mem_inflight,mem_buffered,hashpad_occupancy,in_network\n";
  for (const auto& s : m.trace) {
    t += std::to_string(s.cycle) + "," + std::to_string(s.dispatched) + "," + std::to_string(s.haccs_emitted) + "," +
         std::to_string(s.mem_inflight) + "," + std::to_string(s.mem_buffered) + "," +
         std::to_string(s.hashpad_occupancy) + "," + std::to_string(s.in_network) + "\n";
  }
  put("trace.csv", t);

  // core x mem matrix; the last column is the core's multiplications
  std::string h = "core";
  for (std::size_t j = 0; j < m.accumulations.size(); ++j) h += ",mem" + std::to_string(j);
  h += ",multiplications\n";
  for (std::size_t c = 0; c < m.heatmap.size(); ++c) {
    h += "core" + std::to_string(c);
    for (auto v : m.heatmap[c]) h += "," + std::to_string(v);
    h += "," + std::to_string(m.multiplications[c]) + "\n";
  }
  put("heatmap_work.csv", h);

  std::string mh = "mem,haccs\n";
  for (std::size_t j = 0; j < m.accumulations.size(); ++j) {
    mh += std::to_string(j) + "," + std::to_string(m.accumulations[j]) + "\n";
  }
  put("mapping_heatmap.csv", mh);

  std::string a = "component,busy,stall,idle\n";
  for (const auto& x : m.activity) {
    a += x.name + "," + std::to_string(x.busy) + "," + std::to_string(x.stall) + "," + std::to_string(x.idle) + "\n";
  }
  put("activity.csv", a);

  std::string r = "router,forwarded,injected,delivered,blocked,latency_sum,latency_max,latency_violations\n";
  for (std::size_t i = 0; i < m.routers.size(); ++i) {
    const auto& s = m.routers[i];
    r += std::to_string(i) + "," + std::to_string(s.forwarded) + "," + std::to_string(s.injected) + "," +
         std::to_string(s.delivered) + "," + std::to_string(s.blocked) + "," + std::to_string(s.latency_sum) + "," +
         std::to_string(s.latency_max) + "," + std::to_string(s.latency_violations) + "\n";
  }
  put("routers.csv", r);
  return files;
}

}  // namespace neura
