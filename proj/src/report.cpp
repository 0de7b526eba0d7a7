#include "clane/report.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

namespace clane {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);  // binary: no newline translation
  if (!out) throw std::runtime_error("report: cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

nlohmann::ordered_json op_counts_to_json(const OpCounts& counts) {
  nlohmann::ordered_json j;
  j["timesteps"] = counts.timesteps;
  j["total_synops"] = counts.total_synops();
  j["total_neuron_updates"] = counts.total_neuron_updates();
  j["total_spikes"] = counts.total_spikes();
  j["total_saturations"] = counts.total_saturations();
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (const LayerOpCounts& l : counts.layers) {
    nlohmann::ordered_json lj;
    lj["name"] = l.name;
    lj["synops"] = l.synops;
    lj["neuron_updates"] = l.neuron_updates;
    lj["spikes"] = l.spikes;
    lj["saturations"] = l.saturations;
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);
  return j;
}

nlohmann::ordered_json report_to_json(const RunReport& report) {
  nlohmann::ordered_json j;
  j["learner"] = report.learner;
  j["seed"] = report.seed;
  j["shots"] = report.shots;
  j["class_order"] = report.class_order;
  j["cumulative_accuracy"] = report.cumulative_accuracy;
  j["final_accuracy"] = report.final_accuracy;
  j["class_accuracy"] = report.class_accuracy;
  nlohmann::ordered_json forgetting = nlohmann::ordered_json::object();
  for (const auto& [label, value] : report.forgetting)
    forgetting[std::to_string(label)] = value;
  j["forgetting"] = std::move(forgetting);
  j["state_size"] = report.state_size;
  j["samples_trained"] = report.samples_trained;
  j["ops"] = op_counts_to_json(report.ops);
  return j;
}

void write_reports_jsonl(std::ostream& out, const std::vector<RunReport>& reports) {
  for (const RunReport& r : reports) out << report_to_json(r).dump() << '\n';
}

void write_reports_jsonl(const std::filesystem::path& path,
                         const std::vector<RunReport>& reports) {
  std::ofstream out = open_out(path);
  write_reports_jsonl(out, reports);
}

void write_summary_csv(std::ostream& out, const std::vector<RunReport>& reports) {
  out << "learner,seed,shots,classes,final_accuracy,mean_forgetting,state_size,"
         "total_synops,total_neuron_updates,timesteps\n";
  for (const RunReport& r : reports) {
    double forget = 0.0;
    for (const auto& [label, value] : r.forgetting) forget += value;
    if (!r.forgetting.empty()) forget /= double(r.forgetting.size());
    std::ostringstream row;
    row << r.learner << ',' << r.seed << ',' << r.shots << ',' << r.class_order.size() << ','
        << std::setprecision(17) << r.final_accuracy << ',' << forget << ',' << r.state_size
        << ',' << r.ops.total_synops() << ',' << r.ops.total_neuron_updates() << ','
        << r.ops.timesteps;
    out << row.str() << '\n';
  }
}

void write_summary_csv(const std::filesystem::path& path,
                       const std::vector<RunReport>& reports) {
  std::ofstream out = open_out(path);
  write_summary_csv(out, reports);
}

std::string format_table(const std::vector<RunReport>& reports) {
  std::map<std::string, std::vector<double>> finals;
  for (const RunReport& r : reports) finals[r.learner].push_back(r.final_accuracy);

  std::ostringstream out;
  out << std::left << std::setw(12) << "learner" << std::right << std::setw(8) << "runs"
      << std::setw(12) << "final(mean)" << std::setw(10) << "(std)" << '\n';
  for (const auto& [learner, values] : finals) {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= double(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var = values.size() > 1 ? var / double(values.size() - 1) : 0.0;
    out << std::left << std::setw(12) << learner << std::right << std::setw(8) << values.size()
        << std::fixed << std::setprecision(4) << std::setw(12) << mean << std::setw(10)
        << std::sqrt(var) << std::defaultfloat << '\n';
  }
  return out.str();
}

}  // namespace clane
