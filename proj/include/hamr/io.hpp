#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hamr/fitter.hpp"
#include "hamr/metrics.hpp"
#include "json.hpp"

namespace hamr {

using Json = nlohmann::json;

inline constexpr const char* kModelVersion = "hamr-model/1";

// Hand model files: JSON with a "version" field and the HandModel fields,
// matrices as row lists.
Json model_to_json(const HandModel& model);
/// Throws ParseError on malformed content, VersionMismatch on an unknown
/// version, ValidationError when validate_model fails.
HandModel model_from_json(const Json& j);
void save_model(const HandModel& model, const std::filesystem::path& path);
HandModel load_model(const std::filesystem::path& path);

// Binary PGM (P5, maxval 255). Values are stored as round(255 v).
void write_pgm(const Mask& mask, const std::filesystem::path& path);
Mask read_pgm(const std::filesystem::path& path);

// Wavefront OBJ: v lines, then 1-based f lines, 17 significant digits.
std::string mesh_to_obj(const Mesh& mesh);
void export_mesh(const Mesh& mesh, const std::filesystem::path& path);
Mesh read_obj(const std::filesystem::path& path);

// Datasets: JSON lines, one sample per line. Point lists hold [u, v] or
// [x, y, z] per point and null for unavailable ones; mask_path is relative
// to the dataset file.
struct DatasetRecord {
  Sample sample;
  std::string mask_path;  // as written in the file; empty when absent
};

enum class MaskLoading { Eager, Lazy };

Json sample_to_json(const Sample& sample, const std::string& mask_path);
DatasetRecord sample_from_json(const Json& j);

/// Parse errors carry the 1-based line number. Every referenced mask must
/// exist (FileError otherwise); with Eager loading it is also read.
std::vector<DatasetRecord> read_dataset(const std::filesystem::path& path, MaskLoading loading = MaskLoading::Eager);
std::vector<Sample> load_dataset(const std::filesystem::path& path);
/// Reads the mask of a lazily loaded record in place.
void load_mask(DatasetRecord& record, const std::filesystem::path& dataset_path);

/// Writes `<dir>/samples.jsonl` and `<dir>/<id>.mask.pgm` per sample with a mask.
void save_dataset(const std::vector<Sample>& samples, const std::filesystem::path& dir,
                  const std::string& file_name = "samples.jsonl");

Json params_to_json(const ParamState& state);
/// Accepts a bare state object or any object holding one under "state".
ParamState params_from_json(const Json& j, int num_joints);

Json weights_to_json(const LossWeights& weights);
/// Keys mirror LossWeights field names; missing keys keep their defaults,
/// unknown keys are an error.
LossWeights weights_from_json(const Json& j);

Json schedule_to_json(const FitSchedule& schedule);
FitSchedule schedule_from_json(const Json& j);

Json breakdown_to_json(const LossBreakdown& loss);
Json fit_result_to_json(const FitResult& result, const std::string& id);

Json pck_to_json(const PckCurve& curve);
std::string pck_to_csv(const PckCurve& curve);

Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace hamr
