#include "ranet/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "ranet/image.hpp"
#include "ranet/rng.hpp"

namespace ranet {

const char* to_string(Label l) { return l == Label::covid ? "COVID" : "Normal"; }
const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::test: return "test";
    default: return "validation";
  }
}

Label parse_label(const std::string& s) {
  if (s == "COVID") return Label::covid;
  if (s == "Normal") return Label::normal;
  throw std::invalid_argument("unknown label: " + s);
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  if (s == "validation") return Split::validation;
  throw std::invalid_argument("unknown split: " + s);
}

std::vector<Sample> Manifest::of_split(Split s) const {
  std::vector<Sample> out;
  for (const Sample& smp : samples)
    if (smp.split == s) out.push_back(smp);
  return out;
}

Tensor one_hot(Label l) {
  Tensor t({2});
  t.data[l == Label::covid ? 0 : 1] = 1.0f;
  return t;
}

Tensor preprocess_image(const std::string& path, int target_size) {
  const Tensor chw = image_to_tensor(decode_image(path));
  return resize_image(chw, target_size, target_size);
}

Manifest stratified_split(std::vector<Sample> samples, std::array<double, 3> ratios, std::uint64_t seed) {
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::fabs(total - 1.0) > 1e-9)
    throw std::invalid_argument("split ratios must sum to 1, got " + std::to_string(total));

  for (int cls = 0; cls < 2; ++cls) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < samples.size(); ++i)
      if (static_cast<int>(samples[i].label) == cls) idx.push_back(i);
    if (idx.empty()) continue;

    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(cls) + 1));
    rng.shuffle(idx);

    const double n = static_cast<double>(idx.size());
    std::array<std::size_t, 3> count;
    std::array<double, 3> frac;
    std::size_t assigned = 0;
    for (int s = 0; s < 3; ++s) {
      const double exact = ratios[static_cast<std::size_t>(s)] * n;
      count[static_cast<std::size_t>(s)] = static_cast<std::size_t>(std::floor(exact));
      frac[static_cast<std::size_t>(s)] = exact - std::floor(exact);
      assigned += count[static_cast<std::size_t>(s)];
    }
    // Remainders to the largest fractional parts; ties favor the earlier
    // split in train/test/validation order.
    std::array<int, 3> order = {0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });
    for (std::size_t r = 0; r < idx.size() - assigned; ++r) ++count[static_cast<std::size_t>(order[r % 3])];

    std::size_t pos = 0;
    for (int s = 0; s < 3; ++s)
      for (std::size_t k = 0; k < count[static_cast<std::size_t>(s)]; ++k)
        samples[idx[pos++]].split = static_cast<Split>(s);
  }

  Manifest m;
  m.samples = std::move(samples);
  m.seed = seed;
  m.ratios = ratios;
  return m;
}

void save_manifest(const Manifest& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary: LF endings everywhere
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "id,path,label,split\n";
  for (const Sample& s : m.samples)
    out << s.id << "," << s.path << "," << to_string(s.label) << "," << to_string(s.split) << "\n";
  if (!out) throw std::runtime_error("short write to " + path);
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path);
  std::string line;
  if (!std::getline(in, line) || line != "id,path,label,split")
    throw std::runtime_error(path + ": missing manifest header id,path,label,split");
  Manifest m;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Sample s;
    std::size_t p0 = line.find(',');
    std::size_t p1 = line.find(',', p0 + 1);
    std::size_t p2 = line.find(',', p1 + 1);
    if (p0 == std::string::npos || p1 == std::string::npos || p2 == std::string::npos)
      throw std::runtime_error(path + ": malformed manifest row: " + line);
    s.id = line.substr(0, p0);
    s.path = line.substr(p0 + 1, p1 - p0 - 1);
    s.label = parse_label(line.substr(p1 + 1, p2 - p1 - 1));
    s.split = parse_split(line.substr(p2 + 1));
    m.samples.push_back(std::move(s));
  }
  return m;
}

std::vector<Sample> scan_data_root(const std::string& root) {
  namespace fs = std::filesystem;
  std::vector<Sample> out;
  for (const char* cls : {"COVID", "Normal"}) {
    const fs::path dir = fs::path(root) / cls;
    if (!fs::is_directory(dir)) throw std::runtime_error("missing class directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      std::string ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
      if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      decode_image(f.string());  // ingestion-time validation
      Sample s;
      s.id = std::string(cls) + "/" + f.stem().string();
      s.path = f.string();
      s.label = parse_label(cls);
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace ranet
