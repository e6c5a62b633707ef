#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dciris/dataset.hpp"
#include "dciris/matcher.hpp"
#include "dciris/metrics.hpp"
#include "dciris/pipeline.hpp"
#include "dciris/rubbersheet.hpp"
#include "dciris/synthgen.hpp"

namespace {

using nlohmann::json;

struct SynthArgs {
  std::string out_dir;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::size_t n_identities = 0;
  std::uint64_t seed = 0;
  std::string params_file;
};

struct TrainArgs {
  std::string data_dir;
  std::string out_path;
  std::size_t epochs = 60;
  double lr = 0.001;
  double lambda = 1.0;
  std::uint64_t seed = 0;
  bool paper_scale = false;
};

struct SegmentArgs {
  std::string weights;
  std::string image;
  std::string out_prefix;
};

struct EvalSegArgs {
  std::string weights;
  std::string data_dir;
  std::string report;
};

struct MatchArgs {
  std::string weights;
  std::string data_dir;
  std::size_t max_shift = 8;
  std::string report;
  std::string distances;
};

struct AnchorsArgs {
  std::string image_size;
  double stride = 4.0;
  std::vector<double> radii;
  std::vector<double> ratios;
};

dciris::SynthParams load_synth_params(const std::string& path) {
  std::ifstream in(path);
  dciris::require(in.good(), "cannot open params file " + path);
  const json j = json::parse(in);
  dciris::require(j.is_object(), "params file must hold a JSON object");

  dciris::SynthParams p;
  std::set<std::string> known;
  const auto read = [&](const char* key, auto& field) {
    known.insert(key);
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  read("height", p.height);
  read("width", p.width);
  read("iris_radius_min", p.iris_radius_min);
  read("iris_radius_max", p.iris_radius_max);
  read("pupil_ratio_min", p.pupil_ratio_min);
  read("pupil_ratio_max", p.pupil_ratio_max);
  read("center_jitter", p.center_jitter);
  read("occlusion_prob", p.occlusion_prob);
  read("eyelid_depth_min", p.eyelid_depth_min);
  read("eyelid_depth_max", p.eyelid_depth_max);
  read("highlight_count_min", p.highlight_count_min);
  read("highlight_count_max", p.highlight_count_max);
  read("noise_sigma", p.noise_sigma);
  read("texture_seed", p.texture_seed);
  for (const auto& item : j.items())
    dciris::require(known.count(item.key()) != 0, "unknown params key " + item.key());
  return p;
}

int run_synth(const SynthArgs& a) {
  dciris::SynthParams params;
  if (!a.params_file.empty()) params = load_synth_params(a.params_file);
  dciris::generate_dataset(a.n_train, a.n_test, a.n_identities, params, a.seed, a.out_dir);
  std::cout << "wrote " << (a.n_train + a.n_test) << " images under " << a.out_dir << "\n";
  return 0;
}

std::vector<dciris::TrainExample> load_split(const dciris::DatasetIndex& index,
                                             const std::string& split,
                                             std::vector<std::size_t>* record_indices = nullptr,
                                             std::vector<std::int64_t>* identities = nullptr) {
  std::vector<dciris::TrainExample> out;
  for (std::size_t i = 0; i < index.records.size(); ++i) {
    if (index.records[i].split != split) continue;
    dciris::LoadedRecord r = dciris::load_record(index, i);
    out.push_back({std::move(r.image), std::move(r.mask), r.gt});
    if (record_indices) record_indices->push_back(i);
    if (identities) identities->push_back(r.identity);
  }
  return out;
}

int run_train(const TrainArgs& a) {
  const dciris::DatasetIndex index = dciris::load_dataset_index(a.data_dir);
  const std::vector<dciris::TrainExample> data = load_split(index, "train");
  dciris::require(!data.empty(), "no records with split \"train\" in " + a.data_dir);

  const dciris::ModelConfig mc =
      a.paper_scale ? dciris::ModelConfig::paper_scale() : dciris::ModelConfig::toy();
  dciris::IrisRcnn model(mc, a.seed);

  dciris::TrainConfig tc;
  tc.epochs = a.epochs;
  tc.lr = a.lr;
  tc.lambda = a.lambda;
  tc.seed = a.seed;

  const std::string log_path = a.out_path + ".loss.csv";
  std::ofstream log(log_path);
  dciris::require(log.good(), "cannot open loss log " + log_path);
  log << "epoch,rpn_cls,rpn_reg,crn_cls,crn_reg,mask\n";
  char row[256];
  dciris::train(model, data, tc, [&](const dciris::EpochLoss& e) {
    std::snprintf(row, sizeof(row), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", e.epoch, e.rpn_cls,
                  e.rpn_reg, e.crn_cls, e.crn_reg, e.mask);
    log << row;
    log.flush();
    std::cerr << "epoch " << e.epoch << " total loss " << e.total() << "\n";
  });
  model.save(a.out_path);
  std::cout << "wrote " << a.out_path << " and " << log_path << "\n";
  return 0;
}

json circle_json(const dciris::Circle& c) {
  return json{{"cx", c.cx}, {"cy", c.cy}, {"r", c.r}};
}

int run_segment(const SegmentArgs& a) {
  dciris::IrisRcnn model = dciris::IrisRcnn::load(a.weights);
  const dciris::Tensor image = dciris::read_pgm(a.image);
  const std::optional<dciris::SegmentationResult> res = dciris::segment(model, image);

  json j;
  if (res) {
    j["detected"] = true;
    j["score"] = res->score;
    j["iris"] = circle_json(res->dc.iris);
    j["pupil"] = circle_json(res->dc.pupil);
  } else {
    j["detected"] = false;
  }
  const std::string json_path = a.out_prefix + ".circles.json";
  std::ofstream out(json_path);
  dciris::require(out.good(), "cannot write " + json_path);
  out << j.dump(2) << "\n";

  if (res) {
    dciris::write_pgm(a.out_prefix + ".norm.pgm", res->normalized_iris);
    dciris::write_pgm(a.out_prefix + ".mask.pgm", res->normalized_mask);
    std::cout << "detected, score " << res->score << "\n";
  } else {
    std::cout << "no detection\n";
  }
  return 0;
}

int run_eval_seg(const EvalSegArgs& a) {
  dciris::IrisRcnn model = dciris::IrisRcnn::load(a.weights);
  const dciris::DatasetIndex index = dciris::load_dataset_index(a.data_dir);
  std::vector<std::size_t> record_indices;
  const std::vector<dciris::TrainExample> data = load_split(index, "test", &record_indices);
  dciris::require(!data.empty(), "no records with split \"test\" in " + a.data_dir);

  std::ofstream out(a.report);
  dciris::require(out.good(), "cannot write " + a.report);
  out << "record,iou_seg,err_seg\n";

  std::vector<double> ious, errs;
  char row[128];
  for (std::size_t i = 0; i < data.size(); ++i) {
    const dciris::TrainExample& ex = data[i];
    const std::optional<dciris::SegmentationResult> res = dciris::segment(model, ex.image);
    double iou = 0.0, err = 1.0;
    if (res) {
      const dciris::Tensor region =
          dciris::rasterize_double_circle(res->dc, ex.image.dim(1), ex.image.dim(2));
      iou = dciris::iou_seg(region, ex.mask);
      const auto empty = [](const dciris::Tensor& t) {
        for (std::size_t p = 0; p < t.numel(); ++p)
          if (t[p] != 0.0) return false;
        return true;
      };
      if (empty(region) && empty(ex.mask))
        std::cerr << "note: record " << record_indices[i]
                  << " scored iou 1 with both sets empty\n";
      const dciris::NormalizedMap label = dciris::unwrap_mask(
          ex.mask, res->dc, dciris::kNormalizedHeight, dciris::kNormalizedWidth);
      err = dciris::err_seg(res->normalized_mask, label.data);
    }
    ious.push_back(iou);
    errs.push_back(err);
    std::snprintf(row, sizeof(row), "%zu,%.17g,%.17g\n", record_indices[i], iou, err);
    out << row;
  }

  const auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  const auto stddev = [&](const std::vector<double>& v, double m) {
    if (v.size() < 2) return 0.0;
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
  };
  const double iou_mean = mean(ious), err_mean = mean(errs);
  std::snprintf(row, sizeof(row), "mean,%.17g,%.17g\n", iou_mean, err_mean);
  out << row;
  std::snprintf(row, sizeof(row), "stddev,%.17g,%.17g\n", stddev(ious, iou_mean),
                stddev(errs, err_mean));
  out << row;
  std::cout << "mean iou_seg " << iou_mean << ", mean err_seg " << err_mean << " over "
            << data.size() << " images\n";
  return 0;
}

int run_match(const MatchArgs& a) {
  dciris::IrisRcnn model = dciris::IrisRcnn::load(a.weights);
  const dciris::DatasetIndex index = dciris::load_dataset_index(a.data_dir);
  std::vector<std::size_t> record_indices;
  std::vector<std::int64_t> identities;
  const std::vector<dciris::TrainExample> data =
      load_split(index, "test", &record_indices, &identities);
  dciris::require(!data.empty(), "no records with split \"test\" in " + a.data_dir);

  std::vector<std::optional<dciris::MaskedFeatureMap>> maps(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::optional<dciris::SegmentationResult> res = dciris::segment(model, data[i].image);
    if (res) maps[i] = dciris::MaskedFeatureMap{res->normalized_iris, res->normalized_mask};
  }

  std::ofstream dist_out;
  if (!a.distances.empty()) {
    dist_out.open(a.distances);
    dciris::require(dist_out.good(), "cannot write " + a.distances);
    dist_out << "probe,gallery,distance\n";
  }

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> genuine, imposter;
  char dist_row[96];
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t k = i + 1; k < data.size(); ++k) {
      const double d =
          (maps[i] && maps[k]) ? dciris::shifted_distance(*maps[i], *maps[k], a.max_shift) : inf;
      (identities[i] == identities[k] ? genuine : imposter).push_back(d);
      if (dist_out.is_open()) {
        std::snprintf(dist_row, sizeof(dist_row), "%zu,%zu,%.17g\n", record_indices[i],
                      record_indices[k], d);
        dist_out << dist_row;
      }
    }
  }

  const dciris::EerCurve curve = dciris::eer_roc(genuine, imposter);

  std::ofstream out(a.report);
  dciris::require(out.good(), "cannot write " + a.report);
  out << "kind,threshold,far,frr\n";
  char row[160];
  std::snprintf(row, sizeof(row), "genuine_count,%zu,,\n", genuine.size());
  out << row;
  std::snprintf(row, sizeof(row), "imposter_count,%zu,,\n", imposter.size());
  out << row;
  std::snprintf(row, sizeof(row), "eer,%.17g,%.17g,%.17g\n", curve.eer_threshold, curve.eer,
                curve.eer);
  out << row;
  for (const dciris::RocPoint& p : curve.points) {
    std::snprintf(row, sizeof(row), "roc,%.17g,%.17g,%.17g\n", p.threshold, p.far, p.frr);
    out << row;
  }
  std::cout << "eer " << curve.eer << " over " << genuine.size() << " genuine and "
            << imposter.size() << " imposter pairs\n";
  return 0;
}

int run_anchors(const AnchorsArgs& a) {
  const std::size_t sep = a.image_size.find('x');
  if (sep == std::string::npos || sep == 0 || sep + 1 >= a.image_size.size()) {
    std::cerr << "error: --image-size must look like 128x128\n";
    return 2;
  }
  std::size_t h = 0, w = 0;
  try {
    h = std::stoull(a.image_size.substr(0, sep));
    w = std::stoull(a.image_size.substr(sep + 1));
  } catch (const std::exception&) {
    std::cerr << "error: --image-size must look like 128x128\n";
    return 2;
  }

  std::vector<dciris::DoubleCircle> grid;
  std::size_t feat_h = 0, feat_w = 0;
  try {
    dciris::require(a.stride > 0.0, "stride must be positive");
    feat_h = static_cast<std::size_t>(static_cast<double>(h) / a.stride);
    feat_w = static_cast<std::size_t>(static_cast<double>(w) / a.stride);
    dciris::require(feat_h >= 1 && feat_w >= 1, "image smaller than one stride");
    grid = dciris::anchor_grid(feat_w, feat_h, a.stride, a.radii, a.ratios);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  json j;
  j["feat_h"] = feat_h;
  j["feat_w"] = feat_w;
  j["stride"] = a.stride;
  j["count"] = grid.size();
  json arr = json::array();
  for (const dciris::DoubleCircle& dc : grid)
    arr.push_back(json{{"iris", circle_json(dc.iris)}, {"pupil", circle_json(dc.pupil)}});
  j["anchors"] = std::move(arr);
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Double-circle iris detection, training and matching"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic eye dataset");
  synth->add_option("--out", synth_args.out_dir, "Output directory")->required();
  synth->add_option("--train", synth_args.n_train, "Training image count")
      ->required()
      ->check(CLI::PositiveNumber);
  synth->add_option("--test", synth_args.n_test, "Test image count")
      ->required()
      ->check(CLI::PositiveNumber);
  synth->add_option("--identities", synth_args.n_identities, "Identity count (at least 2)")
      ->required()
      ->check(CLI::Range(std::size_t{2}, std::numeric_limits<std::size_t>::max()));
  synth->add_option("--seed", synth_args.seed, "Root seed");
  synth->add_option("--params", synth_args.params_file, "JSON file overriding generator params");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train a model on a dataset's train split");
  train->add_option("--data", train_args.data_dir, "Dataset directory")->required();
  train->add_option("--out", train_args.out_path, "Output weight file")->required();
  train->add_option("--epochs", train_args.epochs, "Epoch count")->check(CLI::PositiveNumber);
  train->add_option("--lr", train_args.lr, "Initial learning rate")->check(CLI::PositiveNumber);
  train->add_option("--lambda", train_args.lambda, "Regression loss weight")
      ->check(CLI::NonNegativeNumber);
  train->add_option("--seed", train_args.seed, "Seed for init and sampling");
  auto* toy_flag = train->add_flag("--toy", "Toy layer widths (default)");
  train->add_flag("--paper-scale", train_args.paper_scale, "Full-width layers (slow)")
      ->excludes(toy_flag);

  SegmentArgs segment_args;
  auto* segment = app.add_subcommand("segment", "Segment one image");
  segment->add_option("--weights", segment_args.weights, "Weight file")->required();
  segment->add_option("--image", segment_args.image, "Input PGM image")->required();
  segment->add_option("--out-prefix", segment_args.out_prefix, "Output path prefix")->required();

  EvalSegArgs eval_args;
  auto* eval_seg = app.add_subcommand("eval-seg", "Segmentation metrics on the test split");
  eval_seg->add_option("--weights", eval_args.weights, "Weight file")->required();
  eval_seg->add_option("--data", eval_args.data_dir, "Dataset directory")->required();
  eval_seg->add_option("--report", eval_args.report, "Output CSV path")->required();

  MatchArgs match_args;
  auto* match = app.add_subcommand("match", "All-pairs matching on the test split");
  match->add_option("--weights", match_args.weights, "Weight file")->required();
  match->add_option("--data", match_args.data_dir, "Dataset directory")->required();
  match->add_option("--max-shift", match_args.max_shift, "Max circular column shift");
  match->add_option("--report", match_args.report, "Output CSV path")->required();
  match->add_option("--distances", match_args.distances, "Optional all-pairs distance CSV");

  AnchorsArgs anchors_args;
  auto* anchors = app.add_subcommand("anchors", "Dump an anchor grid as JSON");
  anchors->add_option("--image-size", anchors_args.image_size, "HxW, e.g. 128x128")->required();
  anchors->add_option("--stride", anchors_args.stride, "Feature stride in pixels")->required();
  anchors->add_option("--radii", anchors_args.radii, "Comma-separated iris radii")
      ->required()
      ->delimiter(',');
  anchors->add_option("--ratios", anchors_args.ratios, "Comma-separated pupil/iris ratios")
      ->required()
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) return run_synth(synth_args);
    if (train->parsed()) return run_train(train_args);
    if (segment->parsed()) return run_segment(segment_args);
    if (eval_seg->parsed()) return run_eval_seg(eval_args);
    if (match->parsed()) return run_match(match_args);
    if (anchors->parsed()) return run_anchors(anchors_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
