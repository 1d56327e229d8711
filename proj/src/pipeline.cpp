#include "medregion/pipeline.hpp"

#include <atomic>
#include <exception>
#include <set>
#include <thread>

#include "medregion/error.hpp"
#include "medregion/reports.hpp"
#include "medregion/volume_io.hpp"

namespace medregion {

namespace fs = std::filesystem;

namespace {

void require(bool ok, ErrorCode code, const std::string& message) {
  if (!ok) throw Error(code, message);
}

template <typename T>
std::vector<T> fixed_array(const Json& doc, const char* key, std::size_t n) {
  const Json& j = doc.at(key);
  if (!j.is_array() || j.size() != n) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string("config key '") + key + "' needs " + std::to_string(n) + " entries");
  }
  return j.get<std::vector<T>>();
}

fs::path config_path(const Json& j, const fs::path& base) {
  return resolve_relative(base, j.get<std::string>());
}

bool safe_study_id(const std::string& id) {
  return !id.empty() && id != "." && id != ".." && id.find('/') == std::string::npos &&
         id.find('\\') == std::string::npos;
}

}  // namespace

void PipelineConfig::validate() const {
  require(!manifests.empty(), ErrorCode::kInvalidArgument, "no manifest given");
  for (const auto& m : manifests) {
    require(fs::is_regular_file(m), ErrorCode::kIoError, "manifest " + m.string() + " not found");
  }
  if (volume) {
    require(manifests.size() == 1, ErrorCode::kInvalidArgument,
            "'volume' can only replace the CT of a single manifest");
    require(fs::is_regular_file(*volume), ErrorCode::kIoError,
            "volume " + volume->string() + " not found");
  }
  if (weights) {
    require(fs::is_regular_file(*weights), ErrorCode::kIoError,
            "weights " + weights->string() + " not found");
  }
  if (lexicon) {
    require(fs::is_regular_file(*lexicon), ErrorCode::kIoError,
            "lexicon " + lexicon->string() + " not found");
  }
  require(!output_dir.empty(), ErrorCode::kInvalidArgument, "output_dir is required");
  require(target.d >= 1 && target.h >= 1 && target.w >= 1, ErrorCode::kInvalidArgument,
          "target dims must be >= 1");
  const Grid& g = encoder.grid;
  require(g.gh >= 1 && g.gw >= 1, ErrorCode::kInvalidArgument, "grid dims must be >= 1");
  require(g.gh <= target.h && g.gw <= target.w, ErrorCode::kGridTooFine,
          "grid (" + std::to_string(g.gh) + "," + std::to_string(g.gw) +
              ") is finer than the target slice");
  require(encoder.channels >= 1, ErrorCode::kInvalidArgument, "channels must be >= 1");
  require(!encoder.level_ids.empty(), ErrorCode::kInvalidArgument, "level_ids is empty");
  require(std::set<int>(encoder.level_ids.begin(), encoder.level_ids.end()).size() ==
              encoder.level_ids.size(),
          ErrorCode::kInvalidArgument, "level_ids must be distinct");
  require(s <= static_cast<std::size_t>(kNumRegions), ErrorCode::kInvalidArgument,
          "s must be between 0 and 6");
  require(s == 0 || g.size() % s == 0, ErrorCode::kNonDivisibleFactor,
          "s=" + std::to_string(s) + " does not divide T=" + std::to_string(g.size()));
  require(spatial_grid.size() >= 1, ErrorCode::kInvalidArgument, "spatial grid dims must be >= 1");
  const std::size_t placeholders = target.d + (s == 0 ? 0 : g.size()) + 2 * kNumRegions;
  require(placeholders <= max_sequence_length, ErrorCode::kPromptTooLong,
          std::to_string(placeholders) + " placeholder tokens exceed max_sequence_length " +
              std::to_string(max_sequence_length));
  require(jobs >= 1, ErrorCode::kInvalidArgument, "jobs must be >= 1");
  if (generation) {
    EndpointConfig probe;
    probe.base_url = generation->url;
    probe.timeout_seconds = generation->timeout_seconds;
    probe.retries = generation->retries;
    probe.max_concurrency = generation->concurrency;
    probe.validate();
  }
}

PipelineConfig pipeline_config_from_json(const Json& doc, const fs::path& base) {
  if (!doc.is_object()) throw Error(ErrorCode::kInvalidArgument, "config must be a JSON object");
  static const std::set<std::string> known{
      "manifest", "manifests",  "volume",         "weights",     "output_dir",
      "target",   "grid",       "channels",       "s",           "level_ids",
      "spatial_grid", "seed",   "voxel_units",    "complete_merge", "lexicon",
      "max_sequence_length", "prompt_payload", "jobs", "generation"};
  for (const auto& [key, _] : doc.items()) {
    if (!known.count(key)) throw Error(ErrorCode::kInvalidArgument, "unknown config key '" + key + "'");
  }
  PipelineConfig cfg;
  try {
    if (doc.contains("manifest")) cfg.manifests.push_back(config_path(doc["manifest"], base));
    if (doc.contains("manifests")) {
      for (const auto& m : doc["manifests"]) cfg.manifests.push_back(config_path(m, base));
    }
    if (doc.contains("volume")) cfg.volume = config_path(doc["volume"], base);
    if (doc.contains("weights")) cfg.weights = config_path(doc["weights"], base);
    if (doc.contains("output_dir")) cfg.output_dir = config_path(doc["output_dir"], base);
    if (doc.contains("target")) {
      const auto t = fixed_array<std::size_t>(doc, "target", 3);
      cfg.target = {t[0], t[1], t[2]};
    }
    if (doc.contains("grid")) {
      const auto g = fixed_array<std::size_t>(doc, "grid", 2);
      cfg.encoder.grid = {g[0], g[1]};
    }
    if (doc.contains("channels")) cfg.encoder.channels = doc["channels"].get<std::size_t>();
    if (doc.contains("level_ids")) cfg.encoder.level_ids = doc["level_ids"].get<std::vector<int>>();
    if (doc.contains("s")) cfg.s = doc["s"].get<std::size_t>();
    if (doc.contains("spatial_grid")) {
      const auto g = fixed_array<std::size_t>(doc, "spatial_grid", 3);
      cfg.spatial_grid = {g[0], g[1], g[2]};
    }
    if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
    cfg.voxel_units = doc.value("voxel_units", false);
    cfg.complete_merge = doc.value("complete_merge", false);
    if (doc.contains("lexicon")) cfg.lexicon = config_path(doc["lexicon"], base);
    if (doc.contains("max_sequence_length")) {
      cfg.max_sequence_length = doc["max_sequence_length"].get<std::size_t>();
    }
    cfg.prompt_payload = doc.value("prompt_payload", false);
    if (doc.contains("jobs")) cfg.jobs = doc["jobs"].get<unsigned>();
    if (doc.contains("generation")) {
      const Json& g = doc["generation"];
      GenerationConfig gen;
      gen.url = g.at("url").get<std::string>();
      gen.api_key_env = g.value("api_key_env", gen.api_key_env);
      gen.shape = parse_endpoint_shape(g.value("shape", std::string("minimal")));
      gen.timeout_seconds = g.value("timeout", gen.timeout_seconds);
      gen.max_new_tokens = g.value("max_new_tokens", gen.max_new_tokens);
      gen.retries = g.value("retries", gen.retries);
      gen.concurrency = g.value("concurrency", gen.concurrency);
      cfg.generation = gen;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("config: ") + e.what());
  }
  return cfg;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  Json doc;
  try {
    doc = Json::parse(read_file_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, path.string() + ": " + e.what());
  }
  return pipeline_config_from_json(doc, path.parent_path());
}

Study prepare_model_input(const Study& native, const Dims& target) {
  Study out;
  out.id = native.id;
  out.ct = resize_volume(normalize_minmax(native.ct), target, VolumeKind::kImage);
  for (std::size_t r = 0; r < kNumRegions; ++r) {
    out.masks.regions[r] = resize_volume(native.masks.regions[r], target, VolumeKind::kMask);
  }
  out.masks.ct_dims = target;
  out.masks.ct_spacing = out.ct.spacing();
  return out;
}

std::vector<SliceSelection> pipeline_selection(const RegionMaskSet& masks, std::size_t s) {
  auto selection = select_region_slices(masks);
  selection.resize(std::min(s, selection.size()));
  return selection;
}

ProjectionWeights pipeline_weights(const PipelineConfig& cfg) {
  if (!cfg.weights) {
    return make_projection_weights(cfg.encoder.level_ids, cfg.encoder.channels, cfg.spatial_grid,
                                   cfg.seed);
  }
  ProjectionWeights w = load_projection_weights(*cfg.weights);
  require(w.channels == cfg.encoder.channels, ErrorCode::kChannelMismatch,
          "weights have " + std::to_string(w.channels) + " channels, config " +
              std::to_string(cfg.encoder.channels));
  require(w.level_ids == cfg.encoder.level_ids, ErrorCode::kLevelMismatch,
          "weight level ids differ from the configured level_ids");
  require(w.spatial_grid == cfg.spatial_grid, ErrorCode::kInvalidArgument,
          "weight spatial grid differs from the configured spatial_grid");
  return w;
}

StudyResult run_study(const Study& native, const PipelineConfig& cfg,
                      const ProjectionWeights& weights) {
  StudyResult res;
  res.study_id = native.id;

  AttributeOptions attr_opts;
  attr_opts.diameter_unit = cfg.voxel_units ? LengthUnit::kVoxel : LengthUnit::kMillimetre;
  res.attributes = extract_attributes(native.masks, native.masks.ct_spacing, attr_opts);
  res.attribute_text = render_attribute_report(res.attributes);

  const Study model = prepare_model_input(native, cfg.target);
  const SliceFeatureStack features = stub_encode_volume(model.ct, cfg.encoder);
  const auto selection = pipeline_selection(model.masks, cfg.s);
  res.tokens = r2_token_pooling(features, selection);
  res.tokens.study_id = native.id;
  res.segmentation = segmentation_tokens(model.masks, features, selection, weights);
  res.segmentation.study_id = native.id;

  PromptOptions popts;
  popts.max_sequence_length = cfg.max_sequence_length;
  const auto shared = std::make_shared<const TokenSequence>(res.tokens);
  for (const auto& r : kRegions) {
    res.prompts.push_back(build_prompt(shared, res.segmentation, res.attribute_text, r.id, popts));
  }

  if (cfg.generation) {
    EndpointConfig ep;
    ep.base_url = cfg.generation->url;
    ep.api_key = api_key_from_env(cfg.generation->api_key_env);
    ep.shape = cfg.generation->shape;
    ep.timeout_seconds = cfg.generation->timeout_seconds;
    ep.max_new_tokens = cfg.generation->max_new_tokens;
    ep.retries = cfg.generation->retries;
    ep.max_concurrency = cfg.generation->concurrency;
    res.reports = generate_reports(res.prompts, ep);
  }
  return res;
}

void write_study_outputs(const StudyResult& res, const PipelineConfig& cfg, const fs::path& dir) {
  save_token_sequence(res.tokens, dir / "tokens.json");
  save_segmentation_tokens(res.segmentation, dir / "segmentation_tokens.json");
  write_json_file(dir / "attributes.json", attributes_to_json(res.attributes));
  write_file_atomic(dir / "attributes.txt", res.attribute_text + "\n");

  Json summary;
  summary["study_id"] = res.study_id;
  summary["vision_tokens"] = res.tokens.size();
  summary["global_tokens"] = res.tokens.global.rows;
  summary["region_tokens"] = res.tokens.region.rows;
  summary["segmentation_tokens"] = res.segmentation.token_count();
  Json sel = Json::array();
  for (const auto& s : res.tokens.selected_slices) {
    sel.push_back({{"region", s.region_id}, {"slice", s.slice}});
  }
  summary["selected_slices"] = sel;
  Json prompts = Json::array();
  for (const auto& b : res.prompts) {
    const std::string file =
        "prompts/region_" + std::to_string(b.region_id) + "_" +
        std::string(region_info(b.region_id).key) + ".jsonl";
    write_file_atomic(dir / file, prompt_to_jsonl(b, cfg.prompt_payload));
    prompts.push_back({{"region", b.region_id}, {"file", file}, {"token_budget", b.token_budget()}});
  }
  summary["prompts"] = prompts;

  if (!res.reports.empty()) {
    StructuredReport report;
    report.source = ReportSource::kLabeled;
    for (std::size_t r = 0; r < res.reports.size(); ++r) {
      report.regions[r] = split_sentences(res.reports[r]);
    }
    write_json_file(dir / "structured_report.json", structured_report_to_json(report));
    MergeOptions mopts;
    mopts.complete = cfg.complete_merge;
    write_file_atomic(dir / "report.txt", merge_reports(report, mopts) + "\n");
    summary["report"] = "report.txt";
  }
  write_json_file(dir / "summary.json", summary);
}

std::vector<StudyResult> run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  const ProjectionWeights weights = pipeline_weights(cfg);

  std::vector<Study> studies;
  std::set<std::string> ids;
  for (const auto& m : cfg.manifests) {
    Study st = load_study(m);
    if (cfg.volume) {
      st.ct = load_volume(*cfg.volume, VolumeKind::kImage);
      require(st.ct.dims() == st.masks.ct_dims, ErrorCode::kDimsMismatch,
              "volume dims differ from the manifest masks");
    }
    require(safe_study_id(st.id), ErrorCode::kInvalidArgument,
            "study id '" + st.id + "' cannot name an output directory");
    require(ids.insert(st.id).second, ErrorCode::kInvalidArgument,
            "duplicate study id '" + st.id + "'");
    studies.push_back(std::move(st));
  }

  fs::create_directories(cfg.output_dir);
  save_projection_weights(weights, cfg.output_dir / "weights.json");

  std::vector<StudyResult> results(studies.size());
  std::vector<std::exception_ptr> errors(studies.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < studies.size(); i = next++) {
      try {
        results[i] = run_study(studies[i], cfg, weights);
        write_study_outputs(results[i], cfg, cfg.output_dir / studies[i].id);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::min<std::size_t>(cfg.jobs, studies.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

}  // namespace medregion
