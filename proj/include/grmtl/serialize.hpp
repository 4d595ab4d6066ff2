#pragma once

#include "grmtl/metrics.hpp"
#include "grmtl/mtl.hpp"
#include "grmtl/propsvm.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace grmtl {

using Json = nlohmann::ordered_json;

Json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const Json& j);

Json to_json(const SvmModel& model);
SvmModel svm_model_from_json(const Json& j);

// Metadata only; the matrices themselves go to CSV.
Json weight_metadata(const WeightMatrix& weights);
Json structure_metadata(const StructureMatrix& structure);

// Matrix CSV with a header row of column names and one row per matrix row.
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m, const std::vector<std::string>& columns,
                      const std::vector<std::string>& row_names = {});
Matrix read_matrix_csv(const std::filesystem::path& path, std::vector<std::string>* columns = nullptr,
                       bool has_row_names = false);

void write_weights(const std::filesystem::path& csv_path, const std::filesystem::path& json_path,
                   const WeightMatrix& weights, const Json& hyperparameters);
WeightMatrix read_weights(const std::filesystem::path& csv_path, const std::filesystem::path& json_path);

void write_structure(const std::filesystem::path& csv_path, const std::filesystem::path& json_path,
                     const StructureMatrix& structure, const std::vector<std::string>& task_names,
                     const Json& hyperparameters);

void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);

} // namespace grmtl
