#include "ranet/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little, "model files are little-endian");

namespace ranet {

namespace {

constexpr char kMagic[8] = {'R', 'A', 'N', 'E', 'T', 'M', 'D', 'L'};
constexpr std::uint32_t kVersion = 1;

void validate(const ModelConfig& c) {
  std::vector<std::string> violated;
  if (c.input_size < 32 || c.input_size % 32 != 0)
    violated.push_back("input_size must be a positive multiple of 32 (five 2x reductions)");
  if (c.channel_scale <= 0.0f) violated.push_back("channel_scale must be positive");
  if (c.stem_channels < 1) violated.push_back("stem_channels must be >= 1");
  if (c.num_classes < 2) violated.push_back("num_classes must be >= 2");
  if (c.head_hidden < 1) violated.push_back("head_hidden must be >= 1");
  if (!violated.empty()) {
    std::string msg = "invalid model config:";
    for (const auto& v : violated) msg += " " + v + ";";
    throw std::invalid_argument(msg);
  }
}

}  // namespace

int ModelGraph::scaled(int channels) const {
  const long s = std::lround(static_cast<double>(channels) / static_cast<double>(cfg_.channel_scale));
  return static_cast<int>(std::max(1L, s));
}

ModelGraph::ModelGraph(ModelConfig config, std::uint64_t seed) : cfg_(config) {
  validate(cfg_);
  Rng rng(seed);

  // channel_scale divides the stage triples; the stem width is taken as
  // configured.
  const int stem = cfg_.stem_channels;
  stem_conv_ = Conv2dLayer(params_, "stem.conv", 3, stem, 5, 2, kernels::Padding::same, rng);

  // Stage channel triples (mid, out) and strides; spatial sizes follow from
  // the strides: S/4 after the stem pool, then halved entering stages 2..4.
  struct Stage {
    int mid, out, stride;
    bool attention;
  };
  const Stage stages[6] = {
      {32, 128, 1, true},    {128, 256, 2, true},    {256, 512, 2, true},
      {512, 1024, 2, false}, {1024, 1024, 1, false}, {1024, 1024, 1, false},
  };

  res_.reserve(6);
  att_.reserve(3);
  int in_ch = stem;
  int spatial = cfg_.input_size / 4;
  for (int s = 0; s < 6; ++s) {
    const std::string prefix = "stage" + std::to_string(s + 1);
    const int mid = scaled(stages[s].mid), out = scaled(stages[s].out);
    spatial /= stages[s].stride;
    res_.emplace_back(params_, prefix + ".res", ResidualBlockSpec{in_ch, mid, out, stages[s].stride}, rng);
    if (stages[s].attention)
      att_.emplace_back(params_, prefix + ".att", AttentionBlockSpec{out, spatial}, rng);
    in_ch = out;
  }

  fc1_ = DenseLayer(params_, "head.fc1", in_ch, cfg_.head_hidden, rng);
  fc2_ = DenseLayer(params_, "head.fc2", cfg_.head_hidden, cfg_.num_classes, rng);
}

Tape::Id ModelGraph::forward_on(Tape& t, Tape::Id input, std::vector<StageTrace>* trace) {
  const Tensor& v = t.value(input);
  if (v.ndim() != 4 || v.dim(1) != 3 || v.dim(2) != cfg_.input_size || v.dim(3) != cfg_.input_size)
    throw std::invalid_argument("model expects input [N,3," + std::to_string(cfg_.input_size) + "," +
                                std::to_string(cfg_.input_size) + "], got " + shape_str(v.shape));

  auto record = [&](const std::string& name, Tape::Id id) {
    if (trace != nullptr) trace->push_back({name, t.value(id).shape});
    return id;
  };

  Tape::Id h = record("stem.conv", stem_conv_.forward(t, input));
  h = record("stem.pool", t.maxpool2d(h, 2, 2));
  std::size_t a = 0;
  for (std::size_t s = 0; s < res_.size(); ++s) {
    const std::string label = "stage" + std::to_string(s + 1);
    h = record(label + ".res", res_[s].forward(t, h));
    if (s < 3) h = record(label + ".att", att_[a++].forward(t, h));
  }
  h = record("avgpool", t.avgpool2d(h, t.value(h).dim(2)));
  h = t.flatten(h);
  h = t.relu(fc1_.forward(t, h));
  h = record("head", t.softmax(fc2_.forward(t, h)));
  return h;
}

Tensor ModelGraph::forward(const Tensor& batch, Mode mode) {
  Tape t(mode);
  return t.value(forward_on(t, t.leaf(batch)));
}

std::vector<StageTrace> ModelGraph::forward_trace(const Tensor& batch) {
  Tape t(Mode::eval);
  std::vector<StageTrace> trace;
  forward_on(t, t.leaf(batch), &trace);
  return trace;
}

int ModelGraph::tap_channels(FeatureTap) const { return cfg_.stem_channels; }

std::vector<Tensor> ModelGraph::feature_maps(const Tensor& image, FeatureTap tap, int count) {
  Tensor batch = image;
  if (batch.ndim() == 3) batch = Tensor({1, image.dim(0), image.dim(1), image.dim(2)}, image.data);
  if (batch.ndim() != 4 || batch.dim(0) != 1)
    throw std::invalid_argument("feature_maps expects a single image, got " + shape_str(image.shape));

  Tape t(Mode::eval);
  Tape::Id conv_id = stem_conv_.forward(t, t.leaf(batch));
  Tape::Id tap_id = tap == FeatureTap::stem_conv ? conv_id : t.maxpool2d(conv_id, 2, 2);

  const Tensor& act = t.value(tap_id);
  const int C = act.dim(1), H = act.dim(2), W = act.dim(3);
  if (count > C)
    throw std::invalid_argument("requested " + std::to_string(count) + " feature maps but the tap has only " +
                                std::to_string(C) + " channels");

  std::vector<Tensor> maps;
  maps.reserve(static_cast<std::size_t>(count));
  for (int c = 0; c < count; ++c) {
    Tensor m({H, W});
    const float* src = act.ptr() + static_cast<std::size_t>(c) * H * W;
    float lo = src[0], hi = src[0];
    for (int i = 1; i < H * W; ++i) {
      lo = std::min(lo, src[i]);
      hi = std::max(hi, src[i]);
    }
    const float range = hi - lo;
    for (int i = 0; i < H * W; ++i)
      m.data[static_cast<std::size_t>(i)] = range > 0.0f ? (src[i] - lo) / range : 0.0f;
    maps.push_back(std::move(m));
  }
  return maps;
}

void ModelGraph::save(const std::string& path) const {
  std::ostringstream header;
  header.precision(9);  // float round-trips exactly at 9 significant digits
  header << "config input_size=" << cfg_.input_size << " stem_channels=" << cfg_.stem_channels
         << " num_classes=" << cfg_.num_classes << " channel_scale=" << cfg_.channel_scale
         << " head_hidden=" << cfg_.head_hidden << "\n";
  for (const auto& p : params_.all()) {
    header << "tensor " << p->name;
    for (std::size_t i = 0; i < p->value.shape.size(); ++i)
      header << (i == 0 ? " " : "x") << p->value.shape[i];
    header << "\n";
  }
  const std::string text = header.str();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t version = kVersion;
  const std::uint32_t header_len = static_cast<std::uint32_t>(text.size());
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&header_len), 4);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : params_.all())
    out.write(reinterpret_cast<const char*>(p->value.data.data()),
              static_cast<std::streamsize>(p->value.numel() * sizeof(float)));
  if (!out) throw std::runtime_error("short write while saving model to " + path);
}

ModelGraph ModelGraph::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file " + path);

  char magic[8];
  std::uint32_t version = 0, header_len = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&header_len), 4);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error(path + ": bad magic, not a model file");
  if (version != kVersion)
    throw std::runtime_error(path + ": unsupported model file version " + std::to_string(version));

  std::string text(header_len, '\0');
  in.read(text.data(), header_len);
  if (!in) throw std::runtime_error(path + ": truncated model file (header)");

  std::istringstream hs(text);
  ModelConfig cfg;
  {
    std::string line;
    if (!std::getline(hs, line) || line.rfind("config ", 0) != 0)
      throw std::runtime_error(path + ": malformed header, missing config line");
    std::istringstream cs(line.substr(7));
    std::string kv;
    while (cs >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw std::runtime_error(path + ": malformed config entry " + kv);
      const std::string key = kv.substr(0, eq);
      const std::string val = kv.substr(eq + 1);
      if (key == "input_size")
        cfg.input_size = std::stoi(val);
      else if (key == "stem_channels")
        cfg.stem_channels = std::stoi(val);
      else if (key == "num_classes")
        cfg.num_classes = std::stoi(val);
      else if (key == "channel_scale")
        cfg.channel_scale = std::stof(val);
      else if (key == "head_hidden")
        cfg.head_hidden = std::stoi(val);
      else
        throw std::runtime_error(path + ": unknown config key " + key);
    }
  }

  ModelGraph model(cfg, /*seed=*/0);

  // The header's tensor list must match the rebuilt registry exactly.
  std::size_t idx = 0;
  std::string kind, name, dims;
  while (hs >> kind) {
    if (kind != "tensor") throw std::runtime_error(path + ": malformed header entry " + kind);
    hs >> name >> dims;
    if (idx >= model.params_.all().size())
      throw std::runtime_error(path + ": shape mismatch, file lists more tensors than the architecture has");
    const Parameter& p = *model.params_.all()[idx];
    std::string want;
    for (std::size_t i = 0; i < p.value.shape.size(); ++i)
      want += (i == 0 ? "" : "x") + std::to_string(p.value.shape[i]);
    if (name != p.name || dims != want)
      throw std::runtime_error(path + ": shape mismatch for " + name + " " + dims + ", architecture has " +
                               p.name + " " + want);
    ++idx;
  }
  if (idx != model.params_.all().size())
    throw std::runtime_error(path + ": shape mismatch, file lists fewer tensors than the architecture has");

  for (const auto& p : model.params_.all()) {
    in.read(reinterpret_cast<char*>(p->value.data.data()),
            static_cast<std::streamsize>(p->value.numel() * sizeof(float)));
    if (!in) throw std::runtime_error(path + ": truncated model file (payload)");
  }
  in.peek();
  if (!in.eof()) throw std::runtime_error(path + ": trailing bytes after payload");
  return model;
}

}  // namespace ranet
