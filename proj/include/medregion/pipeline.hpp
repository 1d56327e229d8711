#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "medregion/attrx.hpp"
#include "medregion/encoder.hpp"
#include "medregion/file_util.hpp"
#include "medregion/llm_bridge.hpp"
#include "medregion/maskex.hpp"
#include "medregion/prompt.hpp"
#include "medregion/r2_pool.hpp"
#include "medregion/volume.hpp"

namespace medregion {

// Optional report generation step of the pipeline.
struct GenerationConfig {
  std::string url;
  std::string api_key_env = "MEDREGION_API_KEY";
  EndpointShape shape = EndpointShape::kMinimal;
  double timeout_seconds = 60.0;
  int max_new_tokens = 512;
  int retries = 2;
  int concurrency = 2;
};

struct PipelineConfig {
  std::vector<std::filesystem::path> manifests;
  std::optional<std::filesystem::path> volume;   // replaces the manifest CT
  std::optional<std::filesystem::path> weights;  // loaded instead of generated
  std::filesystem::path output_dir;
  Dims target{32, 256, 256};
  EncoderConfig encoder;
  std::size_t s = 6;
  SpatialGrid spatial_grid;
  std::uint64_t seed = 0;
  bool voxel_units = false;
  bool complete_merge = false;
  std::optional<std::filesystem::path> lexicon;
  std::size_t max_sequence_length = 2048;
  bool prompt_payload = false;
  unsigned jobs = 1;
  std::optional<GenerationConfig> generation;

  // Throws InvalidArgument, GridTooFine, NonDivisibleFactor or IoError.
  void validate() const;
};

// Keys: manifest | manifests, volume, weights, output_dir, target [D,H,W],
// grid [gh,gw], channels, s, level_ids, spatial_grid [gd,gh,gw], seed,
// voxel_units, complete_merge, lexicon, max_sequence_length, prompt_payload,
// jobs, generation {url, api_key_env, shape, timeout, max_new_tokens, retries,
// concurrency}. Relative paths resolve against `base_dir`.
PipelineConfig pipeline_config_from_json(const Json& doc, const std::filesystem::path& base_dir);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

// Min-max normalised CT and nearest-resampled region masks at `target`.
// Lesion and organ masks are dropped.
Study prepare_model_input(const Study& native, const Dims& target);

struct StudyResult {
  std::string study_id;
  TokenSequence tokens;
  SegmentationTokenSet segmentation;
  PatientAttributes attributes;
  std::string attribute_text;
  std::vector<PromptBundle> prompts;  // regions 1..6
  std::vector<std::string> reports;   // filled when generation is configured
};

// Slice selection truncated to the first `s` regions.
std::vector<SliceSelection> pipeline_selection(const RegionMaskSet& masks, std::size_t s);

ProjectionWeights pipeline_weights(const PipelineConfig& cfg);

// Everything up to the prompt bundles for one native-resolution study.
StudyResult run_study(const Study& native, const PipelineConfig& cfg,
                      const ProjectionWeights& weights);

// Writes tokens, segmentation tokens, attributes, prompts and a summary.
void write_study_outputs(const StudyResult& result, const PipelineConfig& cfg,
                         const std::filesystem::path& dir);

// Validates, then processes every manifest with up to cfg.jobs studies in
// parallel. Outputs go to <output_dir>/<study id>/, the projection weights to
// <output_dir>/weights.json.
std::vector<StudyResult> run_pipeline(const PipelineConfig& cfg);

}  // namespace medregion
