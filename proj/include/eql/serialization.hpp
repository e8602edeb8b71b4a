#pragma once

// File formats: network/model JSON, dataset CSV with a JSON sidecar, history
// and sweep report CSVs, expression AST JSON.

#include "eql/datasets.hpp"
#include "eql/expression.hpp"
#include "eql/selection.hpp"
#include "eql/trainer.hpp"

#include "json.hpp"

#include <iosfwd>
#include <string>

namespace eql {

using Json = nlohmann::json;

Json network_to_json(const NetworkParams& params);
NetworkParams network_from_json(const Json& j);

Json config_to_json(const TrainConfig& config);
TrainConfig config_from_json(const Json& j, TrainConfig defaults = {});

Json mask_to_json(const SparsityMask& mask);
SparsityMask mask_from_json(const Json& j, const NetworkParams& params);

// Network document plus {mask, config, final_metrics}; history is written
// separately as CSV.
Json model_to_json(const TrainedModel& model, const Json& final_metrics = Json::object());
TrainedModel model_from_json(const Json& j);

void save_model(const std::string& path, const TrainedModel& model, const Json& final_metrics = Json::object());
TrainedModel load_model(const std::string& path);

Json domain_to_json(const Domain& d);
Domain domain_from_json(const Json& j);

// CSV header x1..xn,y1..ym; the sidecar holds {name, n, m, sigma, domain}.
void save_dataset(const LabeledDataset& data, const std::string& csv_path, const std::string& meta_path);
LabeledDataset load_dataset(const std::string& csv_path, const std::string& meta_path = "");
std::string default_meta_path(const std::string& csv_path);

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history);
void save_history_csv(const std::string& path, const std::vector<EpochRecord>& history);
std::vector<EpochRecord> load_history_csv(const std::string& path);

Json expr_to_json(const Expr& e);
Expr expr_from_json(const Json& j);

// One row per candidate: hyperparameters, seed, val_rms, sparsity,
// interp/near/far RMS (empty when not evaluated), selected flag, status.
void write_sweep_csv(std::ostream& out, const std::vector<Candidate>& candidates, std::size_t selected);
void save_sweep_csv(const std::string& path, const std::vector<Candidate>& candidates, std::size_t selected);

void write_noise_grid_csv(std::ostream& out, const std::vector<NoiseGridCell>& cells);

Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace eql
