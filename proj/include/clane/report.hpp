#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "clane/protocol.hpp"

namespace clane {

// Deterministic result persistence: one ordered-JSON object per run (JSONL),
// a flat CSV summary, and a human-readable table. No timestamps or other
// run-varying fields — identical runs serialize byte-identically.

nlohmann::ordered_json report_to_json(const RunReport& report);

void write_reports_jsonl(std::ostream& out, const std::vector<RunReport>& reports);
void write_reports_jsonl(const std::filesystem::path& path, const std::vector<RunReport>& reports);

// learner,seed,shots,classes,final_accuracy,mean_forgetting,state_size,
// total_synops,total_neuron_updates,timesteps
void write_summary_csv(std::ostream& out, const std::vector<RunReport>& reports);
void write_summary_csv(const std::filesystem::path& path, const std::vector<RunReport>& reports);

// Per-learner mean +/- std of final accuracy across seeds, plus per-run rows.
std::string format_table(const std::vector<RunReport>& reports);

nlohmann::ordered_json op_counts_to_json(const OpCounts& counts);

}  // namespace clane
