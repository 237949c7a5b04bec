#include "commands.hpp"

#include <spdlog/spdlog.h>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>

#include "pnp/classical.hpp"
#include "pnp/errors.hpp"
#include "pnp/mssn.hpp"

namespace pnp::cli {

namespace fs = std::filesystem;

namespace {

struct Args {
  // phantom
  std::size_t size = 128;
  std::string contrast = "original";
  // mask
  std::string dims = "128x128";
  std::size_t lines = 36;
  // measure
  std::string image, mask;
  double noise = 0.0;
  std::uint64_t seed = 0;
  // train / synth
  std::string data, config;
  std::size_t count = 40;
  // reconstruct
  std::string y, denoiser = "tv", weights, ref, trace, init = "zf";
  double gamma = 1.0;
  double sigma = 5.0 / 255.0;
  std::size_t iters = 50;
  double tol = 0.0;
  double tv_scale = 1.0;
  bool plain = false;
  // snr
  std::string a, b;
  std::string out;
};

Args args;

std::pair<std::size_t, std::size_t> parse_dims(const std::string& text) {
  const auto x = text.find('x');
  try {
    if (x == std::string::npos) {
      const auto n = std::stoul(text);
      return {n, n};
    }
    return {std::stoul(text.substr(0, x)), std::stoul(text.substr(x + 1))};
  } catch (const std::exception&) {
    throw UsageError("--size expects N or HxW, got '" + text + "'");
  }
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

int cmd_phantom() {
  PhantomContrast c = PhantomContrast::Original;
  if (args.contrast == "modified")
    c = PhantomContrast::Modified;
  else if (args.contrast != "original")
    throw UsageError("--contrast must be 'original' or 'modified'");
  ensure_parent(args.out);
  io::write_image(args.out, shepp_logan(args.size, c));
  return 0;
}

int cmd_mask() {
  const auto [h, w] = parse_dims(args.dims);
  const SamplingMask m = radial_mask(h, w, args.lines);
  ensure_parent(args.out);
  io::write_mask(args.out, m);
  std::printf("sampled %zu of %zu (ratio %.6f)\n", m.count(), h * w, m.ratio());
  return 0;
}

int cmd_measure() {
  const Image x = io::read_image(args.image);
  const SamplingMask m = io::read_mask(args.mask);
  ensure_parent(args.out);
  io::write_kspace(args.out, measure(x, m, args.noise, args.seed));
  return 0;
}

int cmd_synth() {
  fs::create_directories(args.out);
  for (std::size_t i = 0; i < args.count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "synth_%04zu.imgf", i);
    io::write_image(fs::path(args.out) / name, train::synthetic_ellipses(args.size, train::mix_seed(args.seed, 0x5e7, i)));
  }
  return 0;
}

int cmd_train() {
  const TrainSetup setup = args.config.empty() ? TrainSetup{} : train_setup_from_kv(io::KeyValueConfig::load(args.config));
  const auto images = train::load_dataset(args.data);
  train::TrainOptions opt;
  opt.checkpoint_dir = fs::path(args.out);
  const auto r = train::train(setup.train, setup.net, images, opt);
  std::printf("trained %llu iterations; final epoch mean loss %.6e; weights in %s\n",
              static_cast<unsigned long long>(r.iterations), r.curve.back().mean_loss,
              (fs::path(args.out) / "final.mssn").string().c_str());
  return 0;
}

int cmd_reconstruct() {
  if ((args.denoiser == "mssn" || args.denoiser == "ssn") && args.weights.empty())
    throw UsageError("--denoiser " + args.denoiser + " requires --weights");
  const KSpaceMeasurement y = io::read_kspace(args.y);
  const auto denoiser = make_denoiser(args.denoiser, args.weights, args.tv_scale);
  SolverConfig cfg;
  cfg.gamma = args.gamma;
  cfg.sigma = args.sigma;
  cfg.max_iters = args.iters;
  cfg.tol = args.tol;
  cfg.accelerated = !args.plain;
  cfg.validate();
  Image x0;
  if (args.init == "zf")
    x0 = zero_filled(y);
  else if (args.init == "zero")
    x0 = Image(y.values.rows, y.values.cols);
  else
    throw UsageError("--init must be 'zf' or 'zero'");
  Image reference;
  if (!args.ref.empty()) reference = io::read_image(args.ref);
  const SolverResult r = pnp_apgm(y, x0, *denoiser, cfg, args.ref.empty() ? nullptr : &reference);
  ensure_parent(args.out);
  io::write_image(args.out, r.image);
  if (!args.trace.empty()) {
    ensure_parent(args.trace);
    std::ofstream t(args.trace);
    if (!t) throw IoError("cannot open '" + args.trace + "' for writing");
    write_trace_csv(r.trace, t);
  }
  if (!args.ref.empty()) std::printf("snr_db %.6f\n", snr_db(r.image, reference));
  return 0;
}

int cmd_denoise() {
  const auto loaded = io::load_weights(args.weights);
  mssn::MssnWeights w = loaded.weights;
  ensure_parent(args.out);
  io::write_image(args.out, mssn::mssn_denoise(io::read_image(args.image), w, loaded.config));
  return 0;
}

int cmd_snr() {
  std::printf("%.6f\n", snr_db(io::read_image(args.a), io::read_image(args.b)));
  return 0;
}

int cmd_benchmark() {
  const io::KeyValueConfig kv = io::KeyValueConfig::load(args.config);
  const BenchmarkConfig cfg = BenchmarkConfig::from_kv(kv, fs::path(args.config).parent_path());
  const auto rows = run_benchmark(cfg);
  if (args.out.empty()) {
    write_benchmark_csv(cfg, rows, std::cout);
  } else {
    ensure_parent(args.out);
    std::ofstream out(args.out);
    if (!out) throw IoError("cannot open '" + args.out + "' for writing");
    write_benchmark_csv(cfg, rows, out);
  }
  return 0;
}

const char* kTrainFooter =
    "Config keys (key = value; desk default, then the full-scale value where one is given):\n"
    "  patch          16        full  42\n"
    "  stride         8         full  unstated\n"
    "  sigma          5/255     full  5 on the 8-bit scale\n"
    "  epochs         12        full  80\n"
    "  batch          16        full  unstated\n"
    "  lr0            1e-3      full  1e-3\n"
    "  halving_period 50000     full  5e4 iterations\n"
    "  seed           0\n"
    "  features       16        full  128\n"
    "  blocks         1         full  8\n"
    "  heads          2         full  2\n"
    "  tie_blocks     true      full  unstated\n"
    "  variant        mssn      mssn | ssn\n"
    "See configs/train.cfg for both sets side by side.";

const char* kBenchmarkFooter =
    "Config keys: size, phantoms (original, modified), lines (e.g. 36, 48), methods\n"
    "(zf, identity, gauss, tv, mssn, ssn), noise, seed, and per-method <method>.gamma,\n"
    "<method>.sigma, <method>.iters, <method>.weights, tv.lambda_scale. Relative weight paths resolve\n"
    "against the config file's directory. Full-scale setting: 36 and 48 radial lines.";

}  // namespace

void register_commands(CLI::App& app) {
  app.option_defaults()->always_capture_default();

  auto* phantom = app.add_subcommand("phantom", "Write a Shepp-Logan phantom");
  phantom->add_option("--size", args.size, "Side length N (N >= 16)");
  phantom->add_option("--contrast", args.contrast, "Intensity table: original | modified")
      ->check(CLI::IsMember({"original", "modified"}));
  phantom->add_option("--out", args.out, "Output image (IMGF, or PGM for a .pgm name)")->required();

  auto* mask = app.add_subcommand("mask", "Write a radial k-space sampling mask as PGM");
  mask->add_option("--size", args.dims, "N or HxW");
  mask->add_option("--lines", args.lines, "Number of radial lines (full scale: 36 and 48)");
  mask->add_option("--out", args.out, "Output PGM")->required();

  auto* meas = app.add_subcommand("measure", "Sample the masked unitary DFT of an image, with optional noise");
  meas->add_option("--image", args.image, "Input image (IMGF or PGM)")->required();
  meas->add_option("--mask", args.mask, "Mask PGM")->required();
  meas->add_option("--noise", args.noise, "Complex noise std per real/imag part");
  meas->add_option("--seed", args.seed, "Noise seed");
  meas->add_option("--out", args.out, "Output KSPC file")->required();

  auto* synth = app.add_subcommand("synth", "Write a directory of synthetic piecewise-smooth training images");
  synth->add_option("--count", args.count, "Number of images");
  synth->add_option("--size", args.size, "Side length");
  synth->add_option("--seed", args.seed, "Generator seed");
  synth->add_option("--out", args.out, "Output directory")->required();

  auto* tr = app.add_subcommand("train", "Train the attention denoiser on a directory of images");
  tr->add_option("--data", args.data, "Directory of .imgf / .pgm images in [0,1]")->required();
  tr->add_option("--config", args.config, "Key-value training config (desk defaults when omitted)");
  tr->add_option("--out", args.out, "Checkpoint directory (epoch_NNNN.mssn, final.mssn, loss.csv)")->required();
  tr->footer(kTrainFooter);

  auto* rec = app.add_subcommand("reconstruct", "Plug-and-play accelerated proximal gradient reconstruction");
  rec->add_option("--y", args.y, "Measurement (KSPC)")->required();
  rec->add_option("--denoiser", args.denoiser, "identity | gauss | tv | mssn | ssn")
      ->check(CLI::IsMember({"identity", "gauss", "tv", "mssn", "ssn"}));
  rec->add_option("--weights", args.weights, "Weights file for mssn / ssn");
  rec->add_option("--gamma", args.gamma, "Gradient step (1 is the Lipschitz step)");
  rec->add_option("--sigma", args.sigma, "Denoiser strength (desk default 5/255)");
  rec->add_option("--iters", args.iters, "Iteration count K >= 1");
  rec->add_option("--tv-scale", args.tv_scale, "TV weight lambda = tv-scale * sigma");
  rec->add_option("--tol", args.tol, "Stop once the relative change drops below this (0 = never)");
  rec->add_option("--init", args.init, "Initial point: zf (zero-filled) | zero")->check(CLI::IsMember({"zf", "zero"}));
  rec->add_flag("--plain", args.plain, "Disable acceleration (q_k = 1)");
  rec->add_option("--ref", args.ref, "Reference image; enables the SNR column");
  rec->add_option("--out", args.out, "Output image")->required();
  rec->add_option("--trace", args.trace, "Per-iteration CSV trace");

  auto* den = app.add_subcommand("denoise", "Run the trained network patch-wise over one image");
  den->add_option("--image", args.image, "Input image")->required();
  den->add_option("--weights", args.weights, "Weights file")->required();
  den->add_option("--out", args.out, "Output image")->required();

  auto* snr = app.add_subcommand("snr", "Print SNR in dB of --a against the reference --b");
  snr->add_option("--a", args.a, "Estimate")->required();
  snr->add_option("--b", args.b, "Reference")->required();

  auto* bench = app.add_subcommand("benchmark", "Run the method x line-count matrix and write a CSV table");
  bench->add_option("--config", args.config, "Key-value benchmark config")->required();
  bench->add_option("--out", args.out, "Output CSV (stdout when omitted)");
  bench->footer(kBenchmarkFooter);
}

int run_selected(const CLI::App& app) {
  const auto subs = app.get_subcommands();
  const std::string name = subs.front()->get_name();
  if (name == "phantom") return cmd_phantom();
  if (name == "mask") return cmd_mask();
  if (name == "measure") return cmd_measure();
  if (name == "synth") return cmd_synth();
  if (name == "train") return cmd_train();
  if (name == "reconstruct") return cmd_reconstruct();
  if (name == "denoise") return cmd_denoise();
  if (name == "snr") return cmd_snr();
  if (name == "benchmark") return cmd_benchmark();
  throw UsageError("unknown command '" + name + "'");
}

Image make_phantom(const std::string& name, std::size_t size) {
  if (name == "original") return shepp_logan(size, PhantomContrast::Original);
  if (name == "modified") return shepp_logan(size, PhantomContrast::Modified);
  throw UsageError("unknown phantom '" + name + "' (original | modified)");
}

std::unique_ptr<Denoiser> make_denoiser(const std::string& name, const fs::path& weights, double tv_lambda_scale) {
  if (name == "identity") return std::make_unique<IdentityDenoiser>();
  if (name == "gauss") return std::make_unique<GaussianDenoiser>();
  if (name == "tv") {
    TvConfig tc;
    tc.lambda_scale = tv_lambda_scale;
    return std::make_unique<TvDenoiser>(tc);
  }
  if (name == "mssn" || name == "ssn") {
    if (weights.empty()) throw UsageError("denoiser " + name + " requires a weights file");
    auto loaded = io::load_weights(weights);
    const auto want = name == "mssn" ? mssn::Variant::Mssn : mssn::Variant::Ssn;
    if (loaded.config.variant != want)
      throw ContractError("weights file '" + weights.string() + "' holds a different network variant than " + name);
    return std::make_unique<mssn::MssnDenoiser>(std::move(loaded.weights), loaded.config);
  }
  throw UsageError("unknown denoiser '" + name + "'");
}

TrainSetup train_setup_from_kv(const io::KeyValueConfig& kv) {
  kv.require_known({"patch", "stride", "sigma", "epochs", "batch", "lr0", "halving_period", "seed", "features",
                    "blocks", "heads", "tie_blocks", "variant"});
  TrainSetup s;
  auto& t = s.train;
  t.patch = kv.get_size("patch", t.patch);
  t.stride = kv.get_size("stride", t.stride);
  t.sigma = kv.get_double("sigma", t.sigma);
  t.epochs = kv.get_size("epochs", t.epochs);
  t.batch = kv.get_size("batch", t.batch);
  t.lr0 = kv.get_double("lr0", t.lr0);
  t.halving_period = kv.get_u64("halving_period", t.halving_period);
  t.seed = kv.get_u64("seed", t.seed);
  auto& n = s.net;
  n.features = kv.get_size("features", n.features);
  n.blocks = kv.get_size("blocks", n.blocks);
  n.heads = kv.get_size("heads", n.heads);
  n.tie_blocks = kv.get_bool("tie_blocks", n.tie_blocks);
  const std::string variant = kv.get_string("variant", "mssn");
  if (variant == "ssn")
    n.variant = mssn::Variant::Ssn;
  else if (variant != "mssn")
    throw UsageError("variant must be 'mssn' or 'ssn'");
  n.patch = t.patch;
  t.validate();
  n.validate();
  return s;
}

BenchmarkConfig BenchmarkConfig::from_kv(const io::KeyValueConfig& kv, const fs::path& base_dir) {
  BenchmarkConfig c;
  c.size = kv.get_size("size", c.size);
  c.phantoms = kv.get_list("phantoms", c.phantoms);
  c.methods = kv.get_list("methods", c.methods);
  c.noise = kv.get_double("noise", c.noise);
  c.seed = kv.get_u64("seed", c.seed);
  if (kv.has("lines")) {
    c.lines.clear();
    for (const auto& s : kv.get_list("lines", {})) c.lines.push_back(static_cast<std::size_t>(io::parse_real(s)));
  }
  std::set<std::string> known{"size", "phantoms", "methods", "noise", "seed", "lines"};
  for (const std::string m : {"zf", "identity", "gauss", "tv", "mssn", "ssn"}) {
    MethodSettings s;
    s.gamma = kv.get_double(m + ".gamma", s.gamma);
    s.sigma = kv.get_double(m + ".sigma", s.sigma);
    s.iters = kv.get_size(m + ".iters", s.iters);
    s.lambda_scale = kv.get_double(m + ".lambda_scale", s.lambda_scale);
    if (kv.has(m + ".weights")) {
      fs::path p = kv.get_string(m + ".weights", "");
      s.weights = p.is_absolute() ? p : base_dir / p;
    }
    c.settings[m] = s;
    for (const char* k : {".gamma", ".sigma", ".iters", ".weights", ".lambda_scale"}) known.insert(m + k);
  }
  kv.require_known(known);
  for (const auto& m : c.methods)
    if (!c.settings.count(m)) throw UsageError("unknown benchmark method '" + m + "'");
  if (c.phantoms.empty() || c.methods.empty() || c.lines.empty())
    throw UsageError("benchmark needs at least one phantom, method and line count");
  return c;
}

MethodSettings BenchmarkConfig::for_method(const std::string& method) const {
  auto it = settings.find(method);
  return it == settings.end() ? MethodSettings{} : it->second;
}

std::vector<BenchmarkRow> run_benchmark(const BenchmarkConfig& cfg) {
  std::vector<Image> truths;
  for (const auto& p : cfg.phantoms) truths.push_back(make_phantom(p, cfg.size));

  std::map<std::string, std::unique_ptr<Denoiser>> denoisers;
  for (const auto& m : cfg.methods)
    if (m != "zf") denoisers[m] = make_denoiser(m, cfg.for_method(m).weights, cfg.for_method(m).lambda_scale);

  std::vector<BenchmarkRow> rows;
  for (std::size_t li = 0; li < cfg.lines.size(); ++li) {
    const SamplingMask mask = radial_mask(cfg.size, cfg.size, cfg.lines[li]);
    std::vector<KSpaceMeasurement> ys;
    for (std::size_t pi = 0; pi < truths.size(); ++pi)
      ys.push_back(measure(truths[pi], mask, cfg.noise, train::mix_seed(cfg.seed, cfg.lines[li], pi)));
    for (const auto& m : cfg.methods) {
      BenchmarkRow row{m, cfg.lines[li], mask.ratio(), {}, 0.0};
      for (std::size_t pi = 0; pi < truths.size(); ++pi) {
        Image x = zero_filled(ys[pi]);
        if (m != "zf") {
          const MethodSettings s = cfg.for_method(m);
          SolverConfig sc;
          sc.gamma = s.gamma;
          sc.sigma = s.sigma;
          sc.max_iters = s.iters;
          x = pnp_apgm(ys[pi], x, *denoisers.at(m), sc).image;
        }
        row.snr_db.push_back(snr_db(x, truths[pi]));
        row.mean_snr_db += row.snr_db.back() / static_cast<double>(truths.size());
      }
      spdlog::info("benchmark {} lines={} mean snr {:.3f} dB", m, cfg.lines[li], row.mean_snr_db);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void write_benchmark_csv(const BenchmarkConfig& cfg, const std::vector<BenchmarkRow>& rows, std::ostream& out) {
  out << "method,lines,sampling_ratio,mean_snr_db";
  for (const auto& p : cfg.phantoms) out << ",snr_db_" << p;
  out << '\n' << std::setprecision(17);
  for (const auto& r : rows) {
    out << r.method << ',' << r.lines << ',' << r.sampling_ratio << ',' << r.mean_snr_db;
    for (double v : r.snr_db) out << ',' << v;
    out << '\n';
  }
}

}  // namespace pnp::cli
