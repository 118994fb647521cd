#include "derain/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "derain/metrics.hpp"
#include "derain/nn/loss.hpp"
#include "derain/nn/optim.hpp"

namespace derain {

TrainConfig TrainConfig::paper() { return TrainConfig{}; }

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.network.n_rrg = 1;
  c.network.n_dab_per_rrg = 2;
  c.network.channels = 16;
  c.network.ca_reduction = 4;
  c.crop = 64;
  c.batch_size = 4;
  c.total_steps = 2000;
  c.lr_max = 1e-3;
  c.lr_min = 1e-5;
  return c;
}

void TrainConfig::validate() const {
  network.validate();
  filter.validate();
  if (!(lr_min > 0.0) || !(lr_max >= lr_min)) throw Error("train config: need lr_max >= lr_min > 0");
  if (batch_size < 1) throw Error("train config: batch_size must be >= 1");
  if (crop < 16) throw Error("train config: crop must be >= 16");
  if (!(loss_c > 0.0)) throw Error("train config: loss_c must be > 0");
  if (log_interval < 1) throw Error("train config: log_interval must be >= 1");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw Error("config: invalid number for " + key + ": '" + v + "'");
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  unsigned long long out = 0;
  try {
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
    out = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw Error("config: invalid integer for " + key + ": '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw Error("config: invalid boolean for " + key + ": '" + v + "'");
}

}  // namespace

void TrainConfig::set(const std::string& key, const std::string& value) {
  const auto u32 = [&] { return static_cast<std::uint32_t>(parse_uint(key, value)); };
  if (key == "n_rrg") network.n_rrg = u32();
  else if (key == "n_dab_per_rrg") network.n_dab_per_rrg = u32();
  else if (key == "channels") network.channels = u32();
  else if (key == "ca_reduction") network.ca_reduction = u32();
  else if (key == "sa_kernel") network.sa_kernel = u32();
  else if (key == "use_rsgb") network.use_rsgb = parse_bool(key, value);
  else if (key == "zeta") filter.zeta = static_cast<int>(parse_uint(key, value));
  else if (key == "lambda") filter.lambda = parse_double(key, value);
  else if (key == "epsilon") filter.epsilon = parse_double(key, value);
  else if (key == "eta") filter.eta = parse_double(key, value);
  else if (key == "luma_guide") luma_guide = parse_bool(key, value);
  else if (key == "lr_max") lr_max = parse_double(key, value);
  else if (key == "lr_min") lr_min = parse_double(key, value);
  else if (key == "total_steps") total_steps = parse_uint(key, value);
  else if (key == "batch_size") batch_size = static_cast<int>(parse_uint(key, value));
  else if (key == "crop") crop = static_cast<int>(parse_uint(key, value));
  else if (key == "loss_c") loss_c = parse_double(key, value);
  else if (key == "seed") seed = parse_uint(key, value);
  else if (key == "checkpoint_path") checkpoint_path = value;
  else if (key == "log_interval") log_interval = parse_uint(key, value);
  else throw Error("config: unknown key '" + key + "'");
}

std::string TrainConfig::fingerprint() const {
  std::ostringstream s;
  s.precision(17);
  s << network.n_rrg << ',' << network.n_dab_per_rrg << ',' << network.channels << ',' << network.ca_reduction
    << ',' << network.sa_kernel << ',' << network.use_rsgb << ';' << filter.zeta << ',' << filter.lambda << ','
    << filter.epsilon << ',' << filter.eta << ',' << luma_guide;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(s.str())));
  return buf;
}

TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file: " + path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error("config line " + std::to_string(line_no) + ": expected key = value");
    try {
      base.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

std::vector<SamplePair> load_pairs(const DatasetManifest& manifest) {
  std::vector<SamplePair> pairs;
  pairs.reserve(manifest.size());
  for (const auto& entry : manifest) {
    try {
      pairs.push_back(load_pair(entry));
    } catch (const Error& e) {
      throw Error("unloadable sample " + entry.rainy.string() + ": " + e.what());
    }
  }
  return pairs;
}

namespace {

template <typename T>
std::uint64_t digest(const nn::Tensor<T>& t, std::uint64_t hash) {
  return fnv1a(std::span(reinterpret_cast<const unsigned char*>(t.data.data()), t.data.size() * sizeof(T)), hash);
}

void write_checkpoint(const TrainConfig& config, nn::DerainNet<float>& net, const nn::AdamState<float>& adam,
                      std::uint64_t step) {
  if (config.checkpoint_path.empty()) return;
  nn::save_checkpoint(nn::make_checkpoint(net, &adam, step), config.checkpoint_path);
}

}  // namespace

TrainResult train(const TrainConfig& config, const std::vector<SamplePair>& data, std::ostream* log) {
  config.validate();
  if (data.empty()) throw Error("train: no training pairs");
  for (const auto& p : data)
    if (p.rainy.width() < config.crop || p.rainy.height() < config.crop)
      throw Error("train: a training image is smaller than the crop size");

  nn::DerainNet<float> net(config.network);
  nn::initialize(net, config.seed);
  nn::AdamState<float> adam;
  Rng rng = Rng::derive(config.seed, "data");
  TrainResult result;
  const std::uint64_t checkpoint_every = std::max<std::uint64_t>(1, config.total_steps / 10);

  std::vector<ImageRGB> rainy(config.batch_size), clean(config.batch_size), high(config.batch_size);
  for (std::uint64_t step = 0; step < config.total_steps; ++step) {
    for (int b = 0; b < config.batch_size; ++b) {
      const auto& pair = data[rng.below(data.size())];
      SamplePair patch = random_crop_pair(pair, config.crop, rng);
      high[b] = decompose(patch.rainy, config.filter, config.luma_guide).high;
      rainy[b] = std::move(patch.rainy);
      clean[b] = std::move(patch.clean);
    }
    const auto input = nn::to_tensor<float>(std::span<const ImageRGB>(rainy));
    const auto target = nn::to_tensor<float>(std::span<const ImageRGB>(clean));
    const auto hf = nn::to_tensor<float>(std::span<const ImageRGB>(high));
    result.batch_digests.push_back(digest(target, digest(input, 0xcbf29ce484222325ULL)));

    const double lr = nn::cosine_lr(step, config.total_steps, config.lr_max, config.lr_min);
    const auto output = net.forward(input, hf);
    const auto loss = nn::huber_loss(output, target, config.loss_c);
    if (!std::isfinite(loss.value) || !output.all_finite())
      throw TrainingError("non-finite loss at step " + std::to_string(step), step);
    result.losses.push_back(loss.value);
    if (log != nullptr && step % config.log_interval == 0) {
      char line[128];
      std::snprintf(line, sizeof line, "step=%llu lr=%.6g loss=%.6f", static_cast<unsigned long long>(step), lr,
                    loss.value);
      *log << line << '\n' << std::flush;
    }
    net.zero_grad();
    net.backward(loss.grad);
    const auto params = net.parameters();
    nn::adam_step<float>(params, adam, lr);
    if ((step + 1) % checkpoint_every == 0 && step + 1 < config.total_steps) write_checkpoint(config, net, adam, step + 1);
  }
  result.checkpoint = nn::make_checkpoint(net, &adam, config.total_steps);
  write_checkpoint(config, net, adam, config.total_steps);
  return result;
}

TrainResult train(const TrainConfig& config, const DatasetManifest& manifest, std::ostream* log) {
  return train(config, load_pairs(manifest), log);
}

ImageRGB restore(nn::DerainNet<float>& net, const ImageRGB& rainy, const FilterParams& filter, bool luma_guide) {
  const auto input = nn::to_tensor<float>(rainy);
  nn::Tensor<float> hf;
  if (net.config().use_rsgb) hf = nn::to_tensor<float>(decompose(rainy, filter, luma_guide).high);
  return clamp01(nn::to_image(net.forward(input, hf), 0));
}

bool EvalReport::operator==(const EvalReport& o) const {
  if (entries.size() != o.entries.size()) return false;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& a = entries[i];
    const auto& b = o.entries[i];
    if (a.name != b.name || a.psnr != b.psnr || a.ssim != b.ssim) return false;
  }
  return mean_psnr == o.mean_psnr && mean_ssim == o.mean_ssim && fingerprint == o.fingerprint;
}

EvalReport evaluate(const nn::Checkpoint& ckpt, const std::vector<SamplePair>& data,
                    const std::vector<std::string>& names, const FilterParams& filter, bool luma_guide) {
  if (data.empty()) throw Error("evaluate: no pairs");
  nn::DerainNet<float> net(ckpt.config);
  nn::load_parameters(net, ckpt);
  EvalReport report;
  TrainConfig fp;
  fp.network = ckpt.config;
  fp.filter = filter;
  fp.luma_guide = luma_guide;
  report.fingerprint = fp.fingerprint();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data[i].rainy.same_shape(data[i].clean)) throw Error("evaluate: pair dimensions differ");
    const ImageRGB restored = restore(net, data[i].rainy, filter, luma_guide);
    EvalEntry e;
    e.name = i < names.size() ? names[i] : "pair" + std::to_string(i);
    e.psnr = psnr(restored, data[i].clean);
    e.ssim = ssim(restored, data[i].clean);
    report.entries.push_back(e);
    report.mean_psnr += e.psnr;
    report.mean_ssim += e.ssim;
  }
  report.mean_psnr /= static_cast<double>(data.size());
  report.mean_ssim /= static_cast<double>(data.size());
  return report;
}

EvalReport evaluate(const nn::Checkpoint& ckpt, const DatasetManifest& manifest, const FilterParams& filter,
                    bool luma_guide) {
  std::vector<std::string> names;
  for (const auto& e : manifest) names.push_back(e.rainy.string());
  return evaluate(ckpt, load_pairs(manifest), names, filter, luma_guide);
}

std::string format_eval_report(const EvalReport& report) {
  std::ostringstream out;
  out << "# config " << report.fingerprint << '\n' << "image\tPSNR\tSSIM\n";
  char buf[64];
  for (const auto& e : report.entries) {
    std::snprintf(buf, sizeof buf, "\t%.4f", e.ssim);
    out << e.name << '\t' << format_psnr(e.psnr) << buf << '\n';
  }
  std::snprintf(buf, sizeof buf, "\t%.4f", report.mean_ssim);
  out << "mean\t" << format_psnr(report.mean_psnr) << buf << '\n';
  return out.str();
}

int AblationReport::guided_wins() const {
  int wins = 0;
  for (std::size_t i = 0; i + 1 < runs.size(); i += 2)
    if (runs[i + 1].report.mean_psnr >= runs[i].report.mean_psnr) ++wins;
  return wins;
}

bool AblationReport::batches_paired() const {
  for (std::size_t i = 0; i + 1 < runs.size(); i += 2)
    if (runs[i].batch_digests != runs[i + 1].batch_digests) return false;
  return true;
}

std::string AblationReport::table() const {
  std::ostringstream out;
  out << "seed\tmode\tSSIM\tPSNR\n";
  char buf[128];
  double sums[2][2] = {{0, 0}, {0, 0}};
  int counts[2] = {0, 0};
  auto mode = [](bool guided) { return guided ? "proposed" : "no RSGB"; };
  for (const auto& run : runs) {
    std::snprintf(buf, sizeof buf, "%llu\t%s\t%.4f\t%s\n", static_cast<unsigned long long>(run.seed),
                  mode(run.use_rsgb), run.report.mean_ssim, format_psnr(run.report.mean_psnr).c_str());
    out << buf;
    sums[run.use_rsgb][0] += run.report.mean_ssim;
    sums[run.use_rsgb][1] += run.report.mean_psnr;
    ++counts[run.use_rsgb];
  }
  for (int g = 0; g < 2; ++g) {
    if (counts[g] == 0) continue;
    std::snprintf(buf, sizeof buf, "mean\t%s\t%.4f\t%s\n", mode(g == 1), sums[g][0] / counts[g],
                  format_psnr(sums[g][1] / counts[g]).c_str());
    out << buf;
  }
  return out.str();
}

AblationReport ablate(const TrainConfig& config, const std::vector<SamplePair>& train_data,
                      const std::vector<SamplePair>& eval_data, const std::vector<std::uint64_t>& seeds,
                      std::ostream* log) {
  if (seeds.empty()) throw Error("ablate: at least one seed is required");
  AblationReport report;
  for (const auto seed : seeds) {
    for (const bool guided : {false, true}) {
      TrainConfig c = config;
      c.seed = seed;
      c.network.use_rsgb = guided;
      c.checkpoint_path.clear();
      if (log != nullptr) *log << "# ablation seed=" << seed << " mode=" << (guided ? "proposed" : "no RSGB") << '\n';
      TrainResult trained = train(c, train_data, log);
      AblationRun run;
      run.seed = seed;
      run.use_rsgb = guided;
      run.report = evaluate(trained.checkpoint, eval_data, {}, c.filter, c.luma_guide);
      run.batch_digests = std::move(trained.batch_digests);
      report.runs.push_back(std::move(run));
    }
  }
  return report;
}

}  // namespace derain
