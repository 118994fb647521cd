#include "derain/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "derain/data.hpp"
#include "derain/guided_filter.hpp"
#include "derain/metrics.hpp"
#include "derain/train.hpp"

namespace derain {

namespace {

// Flags that map onto TrainConfig keys. Only flags given on the command line
// override the preset and config file.
class ConfigFlags {
 public:
  void add_filter(CLI::App& cmd, const TrainConfig& d) {
    add(cmd, "--radius", "Filter window radius", "zeta", d.filter.zeta);
    add(cmd, "--lambda", "Filter regularization", "lambda", d.filter.lambda);
    add(cmd, "--epsilon", "Edge-aware weighting stabilizer", "epsilon", d.filter.epsilon);
    add(cmd, "--eta", "Aggregation weight temperature", "eta", d.filter.eta);
    flag(cmd, "--luma-guide", "Guide every channel with the luminance", "luma_guide");
  }

  void add_train(CLI::App& cmd, const TrainConfig& d) {
    add(cmd, "--steps", "Total training steps", "total_steps", d.total_steps);
    add(cmd, "--batch", "Batch size", "batch_size", d.batch_size);
    add(cmd, "--crop", "Training crop size", "crop", d.crop);
    add(cmd, "--lr-max", "Initial learning rate", "lr_max", d.lr_max);
    add(cmd, "--lr-min", "Final learning rate", "lr_min", d.lr_min);
    add(cmd, "--loss-c", "Knee of the hybrid L1/L2 loss", "loss_c", d.loss_c);
    add(cmd, "--seed", "Random seed", "seed", d.seed);
    add(cmd, "--log-interval", "Steps between log lines", "log_interval", d.log_interval);
    add(cmd, "--n-rrg", "Residual groups", "n_rrg", d.network.n_rrg);
    add(cmd, "--n-dab", "Dual attention blocks per group", "n_dab_per_rrg", d.network.n_dab_per_rrg);
    add(cmd, "--channels", "Trunk channels", "channels", d.network.channels);
    add(cmd, "--ca-reduction", "Channel attention reduction", "ca_reduction", d.network.ca_reduction);
    add(cmd, "--sa-kernel", "Spatial attention kernel", "sa_kernel", d.network.sa_kernel);
    flag(cmd, "--no-rsgb", "Disable the rain streak guide blocks", "use_rsgb", "false");
    add_filter(cmd, d);
  }

  void apply(TrainConfig& cfg) const {
    for (const auto& [opt, key, value] : bound_)
      if (opt->count() > 0) cfg.set(key, value());
  }

 private:
  template <typename V>
  void add(CLI::App& cmd, const std::string& name, const std::string& help, const std::string& key, V def) {
    auto value = std::make_shared<V>(def);
    auto* opt = cmd.add_option(name, *value, help)->capture_default_str();
    bound_.push_back({opt, key, [value] {
                        std::ostringstream s;
                        s.precision(17);
                        s << *value;
                        return s.str();
                      }});
  }

  void flag(CLI::App& cmd, const std::string& name, const std::string& help, const std::string& key,
            std::string value = "true") {
    auto* opt = cmd.add_flag(name, help);
    bound_.push_back({opt, key, [value] { return value; }});
  }

  struct Bound {
    CLI::Option* opt;
    std::string key;
    std::function<std::string()> value;
  };
  std::vector<Bound> bound_;
};

TrainConfig resolve_config(const std::string& preset, const std::string& config_file, const ConfigFlags& flags) {
  TrainConfig cfg = preset == "desk" ? TrainConfig::desk() : TrainConfig::paper();
  if (!config_file.empty()) cfg = load_train_config(config_file, cfg);
  flags.apply(cfg);
  cfg.validate();
  return cfg;
}

std::vector<SamplePair> pairs_or_empty(const std::string& manifest) {
  return manifest.empty() ? std::vector<SamplePair>{} : load_pairs(load_manifest(manifest));
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Single-image deraining with an improved weighted guided filter and a streak-aware CNN", "derain"};
  app.require_subcommand(1, 1);
  std::function<void()> action;
  const TrainConfig paper = TrainConfig::paper();

  // decompose
  auto* dec = app.add_subcommand("decompose", "Split an image into base and high-frequency layers");
  std::string dec_in, dec_base, dec_high;
  ConfigFlags dec_flags;
  dec->add_option("--input", dec_in, "Input image")->required();
  dec->add_option("--base", dec_base, "Output base layer image")->required();
  dec->add_option("--high", dec_high, "Output high layer image, stored as 0.5 + high")->required();
  dec_flags.add_filter(*dec, paper);
  dec->callback([&] {
    action = [&] {
      TrainConfig cfg = paper;
      dec_flags.apply(cfg);
      const Decomposition d = decompose(load_image(dec_in), cfg.filter, cfg.luma_guide);
      save_image(d.base, dec_base);
      save_image(encode_high(d.high), dec_high);
    };
  });

  // synth
  auto* syn = app.add_subcommand("synth", "Add synthetic rain streaks to a clean image");
  std::string syn_clean, syn_rainy, syn_scene, syn_out_clean;
  RainSynthParams rain;
  syn->add_option("--clean", syn_clean, "Clean input image");
  syn->add_option("--scene", syn_scene, "Generate a procedural clean scene of size WxH instead of --clean");
  syn->add_option("--out-clean", syn_out_clean, "Where to save the generated clean scene");
  syn->add_option("--out-rainy", syn_rainy, "Output rainy image")->required();
  syn->add_option("--density", rain.density, "Streaks per 1000 pixels")->capture_default_str();
  syn->add_option("--length", rain.length, "Streak length in pixels")->capture_default_str();
  syn->add_option("--angle-min", rain.angle_min, "Minimum angle from vertical, degrees")->capture_default_str();
  syn->add_option("--angle-max", rain.angle_max, "Maximum angle from vertical, degrees")->capture_default_str();
  syn->add_option("--intensity", rain.intensity, "Maximum streak brightness")->capture_default_str();
  syn->add_option("--blur-sigma", rain.blur_sigma, "Gaussian blur of the streak layer")->capture_default_str();
  syn->add_option("--seed", rain.seed, "Random seed")->capture_default_str();
  syn->callback([&] {
    action = [&] {
      ImageRGB clean;
      if (!syn_scene.empty()) {
        int w = 0, h = 0;
        char sep = 0;
        std::istringstream s(syn_scene);
        if (!(s >> w >> sep >> h) || sep != 'x' || w < 1 || h < 1)
          throw CLI::ValidationError("--scene", "expected WxH, got " + syn_scene);
        Rng scene_rng = Rng::derive(rain.seed, "scene");
        clean = procedural_scene(w, h, scene_rng);
        if (!syn_out_clean.empty()) save_image(clean, syn_out_clean);
      } else if (!syn_clean.empty()) {
        clean = load_image(syn_clean);
      } else {
        throw CLI::RequiredError("one of --clean or --scene");
      }
      save_image(synthesize_rain(clean, rain).pair.rainy, syn_rainy);
    };
  });

  // train
  auto* trn = app.add_subcommand("train", "Train the network on a manifest of rainy/clean pairs");
  std::string trn_manifest, trn_config, trn_preset = "paper", trn_ckpt;
  ConfigFlags trn_flags;
  trn->add_option("--manifest", trn_manifest, "Training manifest")->required();
  trn->add_option("--config", trn_config, "key = value config file");
  trn->add_option("--preset", trn_preset, "Base configuration")
      ->check(CLI::IsMember({"paper", "desk"}))
      ->capture_default_str();
  trn->add_option("--checkpoint", trn_ckpt, "Checkpoint output path")->required();
  trn_flags.add_train(*trn, paper);
  trn->callback([&] {
    action = [&] {
      TrainConfig cfg = resolve_config(trn_preset, trn_config, trn_flags);
      cfg.checkpoint_path = trn_ckpt;
      train(cfg, load_manifest(trn_manifest), &out);
    };
  });

  // infer
  auto* inf = app.add_subcommand("infer", "Derain one image with a trained checkpoint");
  std::string inf_ckpt, inf_in, inf_out;
  ConfigFlags inf_flags;
  inf->add_option("--checkpoint", inf_ckpt, "Checkpoint file")->required();
  inf->add_option("--input", inf_in, "Rainy input image")->required();
  inf->add_option("--output", inf_out, "Restored output image")->required();
  inf_flags.add_filter(*inf, paper);
  inf->callback([&] {
    action = [&] {
      TrainConfig cfg = paper;
      inf_flags.apply(cfg);
      const nn::Checkpoint ckpt = nn::load_checkpoint(inf_ckpt);
      nn::DerainNet<float> net(ckpt.config);
      nn::load_parameters(net, ckpt);
      save_image(restore(net, load_image(inf_in), cfg.filter, cfg.luma_guide), inf_out);
    };
  });

  // eval
  auto* evl = app.add_subcommand("eval", "Score a checkpoint on a manifest with PSNR and SSIM");
  std::string evl_ckpt, evl_manifest, evl_report;
  ConfigFlags evl_flags;
  evl->add_option("--checkpoint", evl_ckpt, "Checkpoint file")->required();
  evl->add_option("--manifest", evl_manifest, "Evaluation manifest")->required();
  evl->add_option("--report", evl_report, "Also write the report to this file");
  evl_flags.add_filter(*evl, paper);
  evl->callback([&] {
    action = [&] {
      TrainConfig cfg = paper;
      evl_flags.apply(cfg);
      const auto report =
          evaluate(nn::load_checkpoint(evl_ckpt), load_manifest(evl_manifest), cfg.filter, cfg.luma_guide);
      const std::string text = format_eval_report(report);
      out << text;
      if (!evl_report.empty()) {
        std::ofstream f(evl_report);
        if (!(f << text)) throw Error("cannot write report: " + evl_report);
      }
    };
  });

  // ablate
  auto* abl = app.add_subcommand("ablate", "Train with and without the guide blocks and compare");
  std::string abl_manifest, abl_eval, abl_config, abl_preset = "paper", abl_report;
  std::vector<std::uint64_t> abl_seeds{1, 2, 3};
  ConfigFlags abl_flags;
  abl->add_option("--manifest", abl_manifest, "Training manifest")->required();
  abl->add_option("--eval-manifest", abl_eval, "Evaluation manifest (defaults to the training manifest)");
  abl->add_option("--config", abl_config, "key = value config file");
  abl->add_option("--preset", abl_preset, "Base configuration")
      ->check(CLI::IsMember({"paper", "desk"}))
      ->capture_default_str();
  abl->add_option("--seeds", abl_seeds, "Seeds, one paired run each")->delimiter(',')->capture_default_str();
  abl->add_option("--report", abl_report, "Also write the table to this file");
  abl_flags.add_train(*abl, paper);
  abl->callback([&] {
    action = [&] {
      const TrainConfig cfg = resolve_config(abl_preset, abl_config, abl_flags);
      const auto train_pairs = load_pairs(load_manifest(abl_manifest));
      const auto eval_pairs = abl_eval.empty() ? train_pairs : pairs_or_empty(abl_eval);
      std::ostringstream log;
      const AblationReport report = ablate(cfg, train_pairs, eval_pairs, abl_seeds, &log);
      std::ostringstream text;
      text << report.table() << "# guided_wins=" << report.guided_wins() << '/' << abl_seeds.size()
           << " batches_paired=" << (report.batches_paired() ? "yes" : "no") << '\n';
      out << text.str();
      if (!abl_report.empty()) {
        std::ofstream f(abl_report);
        if (!(f << text.str())) throw Error("cannot write report: " + abl_report);
      }
    };
  });

  // metrics
  auto* met = app.add_subcommand("metrics", "PSNR and SSIM between two images");
  std::string met_ref, met_test;
  met->add_option("--ref", met_ref, "Reference image")->required();
  met->add_option("--test", met_test, "Test image")->required();
  met->callback([&] {
    action = [&] {
      const ImageRGB a = load_image(met_ref);
      const ImageRGB b = load_image(met_test);
      char buf[64];
      std::snprintf(buf, sizeof buf, " dB SSIM=%.4f", ssim(a, b));
      out << "PSNR=" << format_psnr(psnr(a, b)) << buf << '\n';
    };
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    if (args.empty()) err << app.help();
    return 1;
  }
  try {
    action();
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace derain
