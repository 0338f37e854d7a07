#include "ranet/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "ranet/data.hpp"
#include "ranet/image.hpp"
#include "ranet/metrics.hpp"

namespace ranet::cli {

namespace {

namespace fs = std::filesystem;

std::vector<TrainSample> load_split(const Manifest& m, Split split, int input_size) {
  std::vector<TrainSample> out;
  for (const Sample& s : m.of_split(split))
    out.push_back({preprocess_image(s.path, input_size), one_hot(s.label)});
  return out;
}

std::vector<int> split_labels(const Manifest& m, Split split) {
  std::vector<int> out;
  for (const Sample& s : m.of_split(split)) out.push_back(static_cast<int>(s.label));
  return out;
}

void append_history(std::ofstream& csv, int epoch, const char* split, const EpochStats& st) {
  csv << epoch << "," << split << "," << std::setprecision(9) << st.mean_loss << "," << st.accuracy << "\n";
}

struct MetricRow {
  const char* name;
  std::optional<double> value;
};

// Table column order: Sens, Spec, Prec, Rec, Acc, AUC.
void emit_metrics(const std::vector<MetricRow>& rows, const std::string& csv_path, std::ostream& out) {
  std::ostringstream table;
  std::ostringstream values;
  for (const auto& r : rows) {
    table << std::setw(6) << r.name;
    if (r.value)
      values << std::setw(6) << std::fixed << std::setprecision(2) << *r.value;
    else
      values << std::setw(6) << "-";
    table << " ";
    values << " ";
  }
  out << table.str() << "\n" << values.str() << "\n";

  if (!csv_path.empty()) {
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write " + csv_path);
    csv << "metric,value\n";
    csv.precision(17);
    for (const auto& r : rows)
      if (r.value) csv << r.name << "," << *r.value << "\n";
  }
}

std::vector<MetricRow> compute_metrics(const std::vector<int>& predictions, const std::vector<int>& labels,
                                       const std::vector<double>& scores) {
  const metrics::ConfusionCounts c = metrics::confusion(predictions, labels, kPositiveClass);
  const metrics::Summary s = metrics::summarize(c);
  return {
      {"sens", s.sensitivity}, {"spec", s.specificity}, {"prec", s.precision},
      {"rec", s.recall},       {"acc", s.accuracy},     {"auc", metrics::auc(scores, labels, kPositiveClass)},
  };
}

void eval_into(ModelGraph& model, const Manifest& manifest, Split split, int batch_size,
               const std::string& csv_path, std::ostream& out) {
  auto samples = load_split(manifest, split, model.config().input_size);
  if (samples.empty()) throw std::runtime_error(std::string("split '") + to_string(split) + "' is empty");
  const Tensor probs = forward_batched(model, samples, batch_size);

  std::vector<int> predictions;
  std::vector<double> scores;
  for (int i = 0; i < probs.dim(0); ++i) {
    const float p_pos = probs.data[static_cast<std::size_t>(i) * probs.dim(1) + kPositiveClass];
    scores.push_back(static_cast<double>(p_pos));
    int best = 0;
    for (int j = 1; j < probs.dim(1); ++j)
      if (probs.data[static_cast<std::size_t>(i) * probs.dim(1) + j] >
          probs.data[static_cast<std::size_t>(i) * probs.dim(1) + best])
        best = j;
    predictions.push_back(best);
  }
  out << "split=" << to_string(split) << " n=" << predictions.size() << "\n";
  emit_metrics(compute_metrics(predictions, split_labels(manifest, split), scores), csv_path, out);
}

}  // namespace

void cmd_split(const SplitArgs& args, std::ostream& out) {
  auto samples = scan_data_root(args.data_root);
  long covid = 0, normal = 0;
  for (const auto& s : samples) (s.label == Label::covid ? covid : normal) += 1;
  if (covid == 0 || normal == 0)
    throw std::runtime_error("each class directory needs at least one image under " + args.data_root);

  Manifest m = stratified_split(std::move(samples), args.ratios, args.seed);
  save_manifest(m, args.out_manifest);

  out << "split     COVID  Normal\n";
  for (Split sp : {Split::train, Split::test, Split::validation}) {
    long c = 0, n = 0;
    for (const auto& s : m.samples)
      if (s.split == sp) (s.label == Label::covid ? c : n) += 1;
    out << std::left << std::setw(10) << to_string(sp) << std::right << std::setw(5) << c << std::setw(8)
        << n << "\n";
  }
  out << "manifest written to " << args.out_manifest << "\n";
}

void cmd_train(const TrainArgs& args, std::ostream& out) {
  validate(args.train);
  const Manifest manifest = load_manifest(args.manifest);
  fs::create_directories(args.out_dir);

  const auto train_samples = load_split(manifest, Split::train, args.model.input_size);
  const auto test_samples = load_split(manifest, Split::test, args.model.input_size);
  if (train_samples.empty()) throw std::runtime_error("manifest has no training samples");

  for (int rep = 0; rep < args.repeats; ++rep) {
    TrainConfig tc = args.train;
    tc.seed = args.train.seed + static_cast<std::uint64_t>(rep);
    ModelGraph model(args.model, tc.seed);
    AdamState state(model.params(), tc);

    const std::string history_path =
        (fs::path(args.out_dir) / (args.repeats == 1 ? "history.csv" : "history_r" + std::to_string(rep) + ".csv"))
            .string();
    std::ofstream history(history_path, std::ios::binary);
    if (!history) throw std::runtime_error("cannot write " + history_path);
    history << "epoch,split,loss,accuracy\n";

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
      const EpochStats train_stats = train_epoch(model, train_samples, tc, state, epoch);
      append_history(history, epoch, "train", train_stats);
      if (!test_samples.empty())
        append_history(history, epoch, "test", evaluate(model, test_samples, tc.batch_size));
      out << "repeat " << rep << " epoch " << epoch << " loss " << std::setprecision(6)
          << train_stats.mean_loss << " acc " << train_stats.accuracy << "\n";
    }

    const std::string model_path = (fs::path(args.out_dir) / "model.ranet").string();
    model.save(model_path);
    out << "model written to " << model_path << "\n";
    if (!test_samples.empty())
      eval_into(model, manifest, Split::test, tc.batch_size,
                (fs::path(args.out_dir) / "metrics_test.csv").string(), out);
  }
}

void cmd_eval(const EvalArgs& args, std::ostream& out) {
  ModelGraph model = ModelGraph::load(args.model_file);
  const Manifest manifest = load_manifest(args.manifest);
  const Split split = parse_split(args.split);
  std::string csv_path;
  if (!args.out_dir.empty()) {
    fs::create_directories(args.out_dir);
    csv_path = (fs::path(args.out_dir) / ("metrics_" + args.split + ".csv")).string();
  }
  eval_into(model, manifest, split, args.batch_size, csv_path, out);
}

void cmd_predict(const PredictArgs& args, std::ostream& out) {
  ModelGraph model = ModelGraph::load(args.model_file);
  const Tensor img = preprocess_image(args.image, model.config().input_size);
  Tensor batch({1, 3, model.config().input_size, model.config().input_size}, img.data);
  const Tensor probs = model.forward(batch, Mode::eval);
  const int pred = probs.data[0] >= probs.data[1] ? 0 : 1;
  out << to_string(static_cast<Label>(pred)) << " " << std::fixed << std::setprecision(4) << probs.data[0]
      << " " << probs.data[1] << "\n";
}

void cmd_featuremaps(const FeatureMapsArgs& args, std::ostream& out) {
  ModelGraph model = ModelGraph::load(args.model_file);
  const Tensor img = preprocess_image(args.image, model.config().input_size);

  const int channels = model.tap_channels(FeatureTap::stem_conv);
  int count = 64;
  if (channels < count) {
    if (!args.allow_fewer)
      throw std::runtime_error("stem has only " + std::to_string(channels) +
                               " channels; use a config with >= 64 stem channels or pass --allow-fewer to "
                               "emit all available maps");
    count = channels;
  }
  int grid = 1;
  while (grid * grid < count) ++grid;

  fs::create_directories(args.out_dir);
  const std::pair<FeatureTap, const char*> taps[2] = {{FeatureTap::stem_conv, "featuremaps_conv.png"},
                                                      {FeatureTap::stem_pool, "featuremaps_pool.png"}};
  for (const auto& [tap, file] : taps) {
    const auto maps = model.feature_maps(img, tap, count);
    const int h = maps[0].dim(0), w = maps[0].dim(1);
    const int side_h = grid * (h + 1) + 1, side_w = grid * (w + 1) + 1;
    std::vector<std::uint8_t> canvas(static_cast<std::size_t>(side_h) * side_w, 0);  // black separators
    for (int m = 0; m < count; ++m) {
      const int r0 = 1 + (m / grid) * (h + 1);
      const int c0 = 1 + (m % grid) * (w + 1);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const float v = maps[static_cast<std::size_t>(m)].data[static_cast<std::size_t>(y) * w + x];
          canvas[static_cast<std::size_t>(r0 + y) * side_w + (c0 + x)] =
              static_cast<std::uint8_t>(std::lround(v * 255.0f));
        }
    }
    const std::string path = (fs::path(args.out_dir) / file).string();
    encode_png_gray(path, side_w, side_h, canvas);
    out << "wrote " << path << " (" << count << " maps, " << grid << "x" << grid << " grid)\n";
  }
}

int run(int argc, const char* const* argv) {
  CLI::App app{"residual-attention network for chest X-ray classification"};
  app.require_subcommand(1);

  SplitArgs split_args;
  auto* split = app.add_subcommand("split", "stratified train/test/validation split of a data directory");
  split->add_option("--data-root", split_args.data_root, "directory with COVID/ and Normal/ image folders")
      ->required();
  split->add_option("--out", split_args.out_manifest, "output manifest CSV path")->required();
  split->add_option("--ratios", split_args.ratios, "train test validation ratios")->expected(3);
  split->add_option("--seed", split_args.seed, "shuffle seed");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train a model from a manifest");
  train->set_config("--config", "", "config file with key=value lines");
  train->add_option("--manifest", train_args.manifest, "manifest CSV from the split command")->required();
  train->add_option("--out-dir", train_args.out_dir, "output directory")->required();
  train->add_option("--epochs", train_args.train.epochs, "training epochs");
  train->add_option("--batch-size", train_args.train.batch_size, "mini-batch size");
  train->add_option("--initial-lr", train_args.train.initial_lr, "initial learning rate");
  train->add_option("--input-size", train_args.model.input_size, "square input resolution");
  train->add_option("--channel-scale", train_args.model.channel_scale, "divisor for stage channel counts");
  train->add_option("--stem-channels", train_args.model.stem_channels, "stem convolution channels");
  train->add_option("--head-hidden", train_args.model.head_hidden, "hidden units in the output head");
  train->add_option("--seed", train_args.train.seed, "run seed");
  train->add_option("--repeats", train_args.repeats, "independent training repetitions")
      ->check(CLI::PositiveNumber);

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "evaluate a trained model on one split");
  eval->add_option("--model", eval_args.model_file, "model file")->required();
  eval->add_option("--manifest", eval_args.manifest, "manifest CSV")->required();
  eval->add_option("--split", eval_args.split, "train, test, or validation");
  eval->add_option("--out-dir", eval_args.out_dir, "directory for the metrics CSV");
  eval->add_option("--batch-size", eval_args.batch_size, "evaluation batch size");

  PredictArgs predict_args;
  auto* predict = app.add_subcommand("predict", "classify a single image");
  predict->add_option("--model", predict_args.model_file, "model file")->required();
  predict->add_option("--image", predict_args.image, "PNG or JPEG image")->required();

  FeatureMapsArgs fm_args;
  auto* fm = app.add_subcommand("featuremaps", "export stem feature-map grids as PNG");
  fm->add_option("--model", fm_args.model_file, "model file")->required();
  fm->add_option("--image", fm_args.image, "PNG or JPEG image")->required();
  fm->add_option("--out-dir", fm_args.out_dir, "output directory")->required();
  fm->add_flag("--allow-fewer", fm_args.allow_fewer,
               "emit all available maps in the smallest square grid when the stem has fewer than 64 channels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (split->parsed()) cmd_split(split_args);
    if (train->parsed()) cmd_train(train_args);
    if (eval->parsed()) cmd_eval(eval_args);
    if (predict->parsed()) cmd_predict(predict_args);
    if (fm->parsed()) cmd_featuremaps(fm_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace ranet::cli
