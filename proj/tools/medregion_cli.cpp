// medregion command-line front end. Exit status: 0 success, 1 invalid input,
// 2 I/O failure.
#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "medregion/attrx.hpp"
#include "medregion/encoder.hpp"
#include "medregion/error.hpp"
#include "medregion/eval.hpp"
#include "medregion/file_util.hpp"
#include "medregion/llm_bridge.hpp"
#include "medregion/maskex.hpp"
#include "medregion/phantom.hpp"
#include "medregion/pipeline.hpp"
#include "medregion/prompt.hpp"
#include "medregion/r2_pool.hpp"
#include "medregion/reports.hpp"
#include "medregion/volume_io.hpp"

#ifndef MEDREGION_DATA_DIR
#define MEDREGION_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using namespace medregion;

namespace {

void emit(const std::optional<fs::path>& out, const std::string& text) {
  if (out) {
    write_file_atomic(*out, text);
  } else {
    std::cout << text;
  }
}

Dims to_dims(const std::vector<std::size_t>& v) { return {v[0], v[1], v[2]}; }

EncoderConfig encoder_config(const std::vector<std::size_t>& grid, std::size_t channels,
                             const std::vector<int>& levels) {
  EncoderConfig cfg;
  cfg.grid = {grid[0], grid[1]};
  cfg.channels = channels;
  cfg.level_ids = levels;
  return cfg;
}

RegionMaskSet masks_matching(const fs::path& manifest, const SliceFeatureStack& features) {
  RegionMaskSet masks = load_mask_set(manifest);
  if (masks.ct_dims.d != features.depth()) {
    throw Error(ErrorCode::kDimsMismatch,
                "mask depth " + std::to_string(masks.ct_dims.d) + " differs from feature depth " +
                    std::to_string(features.depth()) + "; run 'ingest' on the manifest first");
  }
  return masks;
}

std::vector<fs::path> prompt_files(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> files;
  for (const auto& p : inputs) {
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p)) {
        if (e.path().extension() == ".jsonl") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(p);
    }
  }
  return files;
}

int run(int argc, char** argv) {
  CLI::App app{"Region-guided CT report pipeline tools"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "medregion 1.0.0");

  const std::vector<std::size_t> default_target{32, 256, 256};
  const std::vector<std::size_t> default_grid{18, 18};
  const std::vector<int> default_levels{3, 6, 9, 12};
  const std::vector<std::size_t> default_spatial{8, 16, 16};

  // make-phantom (hidden)
  auto* phantom = app.add_subcommand("make-phantom", "Write a synthetic chest CT study");
  phantom->group("");
  fs::path phantom_out;
  std::uint64_t phantom_seed = 7;
  std::vector<std::size_t> phantom_dims{40, 96, 96};
  std::string phantom_id = "phantom";
  phantom->add_option("--out", phantom_out, "Output directory")->required();
  phantom->add_option("--seed", phantom_seed, "Shape jitter and noise seed");
  phantom->add_option("--dims", phantom_dims, "D,H,W")->delimiter(',')->expected(3);
  phantom->add_option("--id", phantom_id, "Study id");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Normalise and resample a study to model input size");
  fs::path ingest_manifest, ingest_out;
  std::vector<std::size_t> ingest_target = default_target;
  ingest->add_option("--manifest", ingest_manifest, "Study manifest")->required();
  ingest->add_option("--out", ingest_out, "Output directory")->required();
  ingest->add_option("--target", ingest_target, "D,H,W")->delimiter(',')->expected(3);

  // encode
  auto* encode = app.add_subcommand("encode", "Run the stub slice encoder on a volume");
  fs::path encode_volume, encode_out;
  std::vector<std::size_t> encode_grid = default_grid;
  std::size_t encode_channels = 64;
  std::vector<int> encode_levels = default_levels;
  encode->add_option("--volume", encode_volume, "Volume (.json raw container or NIfTI)")
      ->required();
  encode->add_option("--out", encode_out, "Feature container header (.json)")->required();
  encode->add_option("--grid", encode_grid, "gh,gw")->delimiter(',')->expected(2);
  encode->add_option("--channels", encode_channels, "Channels per token");
  encode->add_option("--levels", encode_levels, "Level ids")->delimiter(',');

  // pool
  auto* pool = app.add_subcommand("pool", "R2 token pooling of encoded features");
  fs::path pool_features, pool_manifest, pool_out;
  std::size_t pool_s = 6;
  std::optional<int> pool_level;
  pool->add_option("--features", pool_features, "Feature container")->required();
  pool->add_option("--manifest", pool_manifest, "Manifest of model-space masks")->required();
  pool->add_option("--out", pool_out, "Token sequence header (.json)")->required();
  pool->add_option("--s", pool_s, "Number of representative slices (0..6)");
  pool->add_option("--level", pool_level, "Level id (default: last)");

  // segtok
  auto* segtok = app.add_subcommand("segtok", "Mask and spatial tokens for the six regions");
  fs::path seg_features, seg_manifest, seg_out;
  std::optional<fs::path> seg_weights, seg_save_weights;
  std::uint64_t seg_seed = 0;
  std::size_t seg_s = 6;
  std::vector<std::size_t> seg_spatial = default_spatial;
  segtok->add_option("--features", seg_features, "Feature container")->required();
  segtok->add_option("--manifest", seg_manifest, "Manifest of model-space masks")->required();
  segtok->add_option("--out", seg_out, "Segmentation token file (.json)")->required();
  segtok->add_option("--weights", seg_weights, "Projection weights header");
  segtok->add_option("--save-weights", seg_save_weights, "Write the weights used");
  segtok->add_option("--seed", seg_seed, "Seed for generated weights");
  segtok->add_option("--s", seg_s, "Number of representative slices (0..6)");
  segtok->add_option("--spatial-grid", seg_spatial, "gd,gh,gw")->delimiter(',')->expected(3);

  // attrs
  auto* attrs = app.add_subcommand("attrs", "Organ volumes and lesion morphometrics");
  fs::path attrs_manifest;
  std::optional<fs::path> attrs_out;
  bool attrs_voxel = false, attrs_text = false;
  int attrs_conn = 26;
  attrs->add_option("--manifest", attrs_manifest, "Study manifest")->required();
  attrs->add_option("--out", attrs_out, "Output file (default stdout)");
  attrs->add_flag("--voxel-units", attrs_voxel, "Report diameters in voxels");
  attrs->add_flag("--text", attrs_text, "Emit the prompt text instead of JSON");
  attrs->add_option("--connectivity", attrs_conn, "6 or 26")->check(CLI::IsMember({6, 26}));

  // prompt
  auto* prompt = app.add_subcommand("prompt", "Assemble per-region prompt bundles");
  fs::path prompt_tokens, prompt_segtok, prompt_attrs, prompt_out;
  std::optional<int> prompt_region;
  bool prompt_payload = false, prompt_text = false;
  std::size_t prompt_max = 2048;
  prompt->add_option("--tokens", prompt_tokens, "Token sequence header")->required();
  prompt->add_option("--segtok", prompt_segtok, "Segmentation token file")->required();
  prompt->add_option("--attrs", prompt_attrs, "Attributes JSON")->required();
  prompt->add_option("--out", prompt_out, "Output directory")->required();
  prompt->add_option("--region", prompt_region, "Single region id (default: all six)")->check(CLI::Range(1, 6));
  prompt->add_flag("--payload", prompt_payload, "Embed token values");
  prompt->add_flag("--render", prompt_text, "Also write the text rendering (.txt)");
  prompt->add_option("--max-seq", prompt_max, "Maximum sequence length");

  // split-report
  auto* split = app.add_subcommand("split-report", "Split a report into the six regions");
  std::optional<fs::path> split_text, split_labels, split_labeled, split_out;
  fs::path split_lexicon = fs::path(MEDREGION_DATA_DIR) / "lexicon_v1.json";
  split->add_option("--text", split_text, "Plain report text");
  split->add_option("--labels", split_labels, "JSON array with one region id per sentence")
      ;
  split->add_option("--labeled", split_labeled, "JSONL {sentence, region}");
  split->add_option("--lexicon", split_lexicon, "Keyword lexicon");
  split->add_option("--out", split_out, "Output file (default stdout)");

  // merge-report
  auto* merge = app.add_subcommand("merge-report", "Merge a structured report into one text");
  fs::path merge_in;
  std::optional<fs::path> merge_out;
  bool merge_complete = false;
  merge->add_option("--in", merge_in, "Structured report JSON")->required();
  merge->add_option("--out", merge_out, "Output file (default stdout)");
  merge->add_flag("--complete", merge_complete, "Emit placeholders for empty regions");

  // eval
  auto* eval = app.add_subcommand("eval", "BLEU-4, ROUGE-L and METEOR-lite over text pairs");
  fs::path eval_pairs;
  std::optional<fs::path> eval_out;
  eval->add_option("--pairs", eval_pairs, "JSONL {candidate, reference}")->required();
  eval->add_option("--out", eval_out, "Output file (default stdout)");

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "End-to-end run from a JSON config");
  fs::path pipe_config;
  std::optional<std::uint64_t> pipe_seed;
  std::optional<unsigned> pipe_jobs;
  std::optional<fs::path> pipe_out;
  pipeline->add_option("--config", pipe_config, "Config JSON")->required();
  pipeline->add_option("--seed", pipe_seed, "Overrides the config seed");
  pipeline->add_option("--jobs", pipe_jobs, "Studies processed in parallel");
  pipeline->add_option("--out", pipe_out, "Overrides output_dir");

  // generate
  auto* generate = app.add_subcommand("generate", "Send prompt bundles to a generation endpoint");
  std::vector<fs::path> gen_inputs;
  std::string gen_url, gen_shape = "minimal", gen_key_env = "MEDREGION_API_KEY";
  double gen_timeout = 60.0;
  int gen_retries = 2, gen_concurrency = 2, gen_max_new = 512;
  fs::path gen_out;
  bool gen_complete = false, gen_verbose = false;
  generate->add_option("--prompts", gen_inputs, "Prompt bundle files or directories")->required();
  generate->add_option("--url", gen_url, "Endpoint URL")->required();
  generate->add_option("--shape", gen_shape, "minimal|openai|tgi");
  generate->add_option("--api-key-env", gen_key_env, "Environment variable holding the API key");
  generate->add_option("--timeout", gen_timeout, "Seconds per request");
  generate->add_option("--retries", gen_retries, "Retries on transient failures");
  generate->add_option("--concurrency", gen_concurrency, "Requests in flight");
  generate->add_option("--max-new-tokens", gen_max_new, "Generation length");
  generate->add_option("--out", gen_out, "Output directory")->required();
  generate->add_flag("--complete", gen_complete, "Placeholders for empty regions in report.txt");
  generate->add_flag("-v,--verbose", gen_verbose, "Log requests to stderr (keys redacted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (phantom->parsed()) {
    PhantomOptions o;
    o.dims = to_dims(phantom_dims);
    o.seed = phantom_seed;
    o.id = phantom_id;
    std::cout << write_phantom(make_phantom(o), phantom_out).string() << "\n";
  } else if (ingest->parsed()) {
    const Study model = prepare_model_input(load_study(ingest_manifest), to_dims(ingest_target));
    std::cout << save_study(model, ingest_out).string() << "\n";
  } else if (encode->parsed()) {
    const VolumeTensor vol = load_volume(encode_volume);
    save_features(stub_encode_volume(vol, encoder_config(encode_grid, encode_channels, encode_levels)),
                  encode_out);
  } else if (pool->parsed()) {
    const SliceFeatureStack features = load_precomputed_features(pool_features);
    const auto selection = pipeline_selection(masks_matching(pool_manifest, features), pool_s);
    TokenSequence seq = pool_level ? r2_token_pooling(features, selection, *pool_level)
                                   : r2_token_pooling(features, selection);
    seq.study_id = load_study(pool_manifest).id;
    save_token_sequence(seq, pool_out);
    std::cout << seq.size() << " tokens (" << seq.global.rows << " global, " << seq.region.rows
              << " region)\n";
  } else if (segtok->parsed()) {
    const SliceFeatureStack features = load_precomputed_features(seg_features);
    const RegionMaskSet masks = masks_matching(seg_manifest, features);
    std::vector<int> level_ids;
    for (const auto& l : features.levels()) level_ids.push_back(l.level_id);
    const SpatialGrid grid{seg_spatial[0], seg_spatial[1], seg_spatial[2]};
    const ProjectionWeights w =
        seg_weights ? load_projection_weights(*seg_weights)
                    : make_projection_weights(level_ids, features.channels(), grid, seg_seed);
    if (seg_save_weights) save_projection_weights(w, *seg_save_weights);
    SegmentationTokenSet set =
        segmentation_tokens(masks, features, pipeline_selection(masks, seg_s), w);
    set.study_id = load_study(seg_manifest).id;
    save_segmentation_tokens(set, seg_out);
  } else if (attrs->parsed()) {
    const RegionMaskSet masks = load_mask_set(attrs_manifest);
    AttributeOptions o;
    o.diameter_unit = attrs_voxel ? LengthUnit::kVoxel : LengthUnit::kMillimetre;
    o.connectivity = attrs_conn == 6 ? Connectivity::k6 : Connectivity::k26;
    const PatientAttributes a = extract_attributes(masks, masks.ct_spacing, o);
    emit(attrs_out, attrs_text ? render_attribute_report(a) + "\n"
                               : attributes_to_json(a).dump(2) + "\n");
  } else if (prompt->parsed()) {
    auto tokens = std::make_shared<const TokenSequence>(load_token_sequence(prompt_tokens));
    const SegmentationTokenSet set = load_segmentation_tokens(prompt_segtok);
    const std::string attr_text =
        render_attribute_report(attributes_from_json(read_json_file(prompt_attrs)));
    PromptOptions o;
    o.max_sequence_length = prompt_max;
    for (const auto& r : kRegions) {
      if (prompt_region && *prompt_region != r.id) continue;
      const PromptBundle b = build_prompt(tokens, set, attr_text, r.id, o);
      const std::string stem = "region_" + std::to_string(r.id) + "_" + std::string(r.key);
      write_file_atomic(prompt_out / (stem + ".jsonl"), prompt_to_jsonl(b, prompt_payload));
      if (prompt_text) write_file_atomic(prompt_out / (stem + ".txt"), render_prompt_text(b) + "\n");
      std::cout << stem << ": " << b.token_budget() << " tokens\n";
    }
  } else if (split->parsed()) {
    StructuredReport report;
    if (split_labeled) {
      if (split_text || split_labels) {
        throw Error(ErrorCode::kInvalidArgument, "--labeled excludes --text and --labels");
      }
      report = group_labeled(parse_labeled_jsonl(read_file_text(*split_labeled)));
    } else {
      if (!split_text) throw Error(ErrorCode::kInvalidArgument, "--text or --labeled is required");
      std::optional<std::vector<int>> labels;
      if (split_labels) {
        const Json j = read_json_file(*split_labels);
        if (!j.is_array()) throw Error(ErrorCode::kSchemaViolation, "--labels must hold a JSON array");
        labels = j.get<std::vector<int>>();
      }
      report = split_report(read_file_text(*split_text), labels, Lexicon::load(split_lexicon));
    }
    emit(split_out, structured_report_to_json(report).dump(2) + "\n");
  } else if (merge->parsed()) {
    MergeOptions o;
    o.complete = merge_complete;
    emit(merge_out,
         merge_reports(structured_report_from_json(read_json_file(merge_in)), o) + "\n");
  } else if (eval->parsed()) {
    const MetricReport r = evaluate_pairs(parse_pairs_jsonl(read_file_text(eval_pairs)));
    emit(eval_out, metric_report_to_json(r).dump(2) + "\n");
  } else if (pipeline->parsed()) {
    PipelineConfig cfg = load_pipeline_config(pipe_config);
    if (pipe_seed) cfg.seed = *pipe_seed;
    if (pipe_jobs) cfg.jobs = *pipe_jobs;
    if (pipe_out) cfg.output_dir = *pipe_out;
    for (const auto& r : run_pipeline(cfg)) {
      std::cout << r.study_id << ": " << r.tokens.size() << " vision tokens, "
                << r.segmentation.token_count() << " segmentation tokens, " << r.prompts.size()
                << " prompts\n";
    }
  } else if (generate->parsed()) {
    EndpointConfig ep;
    ep.base_url = gen_url;
    ep.api_key = api_key_from_env(gen_key_env);
    ep.shape = parse_endpoint_shape(gen_shape);
    ep.timeout_seconds = gen_timeout;
    ep.retries = gen_retries;
    ep.max_concurrency = gen_concurrency;
    ep.max_new_tokens = gen_max_new;
    if (gen_verbose) ep.log = [](std::string_view line) { std::cerr << line << "\n"; };
    ep.validate();
    std::vector<PromptBundle> bundles;
    for (const auto& f : prompt_files(gen_inputs)) {
      bundles.push_back(prompt_from_jsonl(read_file_text(f)));
    }
    if (bundles.empty()) throw Error(ErrorCode::kInvalidArgument, "no prompt bundles found");
    const auto texts = generate_reports(bundles, ep);
    StructuredReport report;
    for (std::size_t i = 0; i < bundles.size(); ++i) {
      const std::size_t r = static_cast<std::size_t>(region_info(bundles[i].region_id).id - 1);
      const auto sentences = split_sentences(texts[i]);
      report.regions[r].insert(report.regions[r].end(), sentences.begin(), sentences.end());
    }
    write_json_file(gen_out / "structured_report.json", structured_report_to_json(report));
    MergeOptions o;
    o.complete = gen_complete;
    write_file_atomic(gen_out / "report.txt", merge_reports(report, o) + "\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_io_error(e.code()) ? 2 : 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
