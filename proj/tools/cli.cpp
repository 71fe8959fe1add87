#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "foldgraph/checkpoint.hpp"
#include "foldgraph/classifier.hpp"
#include "foldgraph/errors.hpp"
#include "foldgraph/graph_signal.hpp"
#include "foldgraph/network.hpp"
#include "foldgraph/theory.hpp"
#include "foldgraph/trainer.hpp"

namespace fs = std::filesystem;

namespace foldgraph::cli {

namespace {

struct KeySpec {
  std::string name;
  std::string def;
  bool path = false;
  bool multi = false;
  bool flag = false;
};

/// Resolved configuration: every known key maps to its values (one for scalar keys).
using Config = std::map<std::string, std::vector<std::string>>;

const std::vector<std::string> kCommands = {"train",       "reconstruct", "encode",   "spectra",
                                            "alpha-sweep", "certify",     "classify", "replay"};

const std::map<std::string, std::string> kDescriptions = {
    {"train", "train an autoencoder; writes checkpoint.bin, train.log, clip.log"},
    {"reconstruct", "coarse and refined reconstructions with a distance report"},
    {"encode", "one latent code per input cloud in codes.txt"},
    {"spectra", "Laplacian spectrum of the learned graph and eigenvector colorings"},
    {"alpha-sweep", "reconstructions at alpha 0, 0.25, 0.5, 0.75, 1"},
    {"certify", "run the reconstruction-bound and graph-smoothness oracles"},
    {"classify", "linear classifier on code files"},
    {"replay", "rerun a manifest and compare output checksums"}};

std::vector<KeySpec> model_keys() {
  return {{"code_len", "512"},
          {"lattice_side", "45"},
          {"knn_k", "96"},
          {"sigma", "0.08"},
          {"mu", "0.5"},
          {"filter", "adjacency"},
          {"encoder_point_widths", "64,128,1024"},
          {"encoder_code_widths", "512"},
          {"fold_widths", "512,512"},
          {"fold_inner_dim", "3"},
          {"topo_hidden", "256"}};
}

std::vector<KeySpec> source_keys() {
  return {{"input", "", true, true},
          {"data", "", true},
          {"synthetic", ""},
          {"data_seed", ""},
          {"normalize", "true"}};
}

std::vector<KeySpec> keys_for(const std::string& cmd) {
  std::vector<KeySpec> keys{{"out", "", true}, {"seed", "0"}};
  auto append = [&keys](const std::vector<KeySpec>& more) {
    keys.insert(keys.end(), more.begin(), more.end());
  };
  if (cmd == "train") {
    append({{"data", "", true},
            {"synthetic", ""},
            {"data_seed", ""},
            {"normalize", "true"},
            {"loss", "augcd"},
            {"epochs", "1"},
            {"lr", "0.0001"},
            {"batch_size", "32"},
            {"clip_norm", "10"},
            {"checkpoint_every", "0"},
            {"resume", "", true}});
    append(model_keys());
  } else if (cmd == "reconstruct") {
    append({{"checkpoint", "", true}, {"trace_node", ""}, {"trace_input", "0"}, {"trace_k", "0"}});
    append(source_keys());
  } else if (cmd == "encode" || cmd == "spectra") {
    append({{"checkpoint", "", true}});
    append(source_keys());
  } else if (cmd == "alpha-sweep") {
    append({{"checkpoint", "", true}, {"family", ""}});
    append(source_keys());
  } else if (cmd == "certify") {
    append({{"k_max", "6"},
            {"clouds", "50"},
            {"cloud_points", "100"},
            {"thm2_k", "2,4,6"},
            {"thm3_pairs", "200"},
            {"thm4_graphs", "1000"},
            {"thm4_signals", "10"},
            {"mu", "1"},
            {"corner_proxy", "false", false, false, true}});
  } else if (cmd == "classify") {
    append({{"train_codes", "", true},
            {"train_labels", "", true},
            {"test_codes", "", true},
            {"test_labels", "", true},
            {"epochs", "500"},
            {"lr", "0.01"},
            {"l2", "0.0001"}});
  }
  return keys;
}

std::string flag_name(const std::string& key) {
  std::string s = "--" + key;
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot open '" + path.string() + "' for writing");
  return out;
}

/// "key = value" lines; '#' starts a comment. Repeated keys accumulate.
Config read_config_file(const fs::path& path, const std::vector<KeySpec>& keys) {
  std::istringstream in(read_text(path));
  Config cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value' in " + path.string(), line_no);
    std::string key = trim(t.substr(0, eq));
    std::replace(key.begin(), key.end(), '-', '_');
    const auto spec = std::find_if(keys.begin(), keys.end(), [&](const KeySpec& k) { return k.name == key; });
    if (spec == keys.end()) {
      throw UsageError("unknown key '" + key + "' in " + path.string() + " line " + std::to_string(line_no));
    }
    std::string value = trim(t.substr(eq + 1));
    if (spec->path && !value.empty()) value = fs::absolute(path.parent_path() / value).lexically_normal().string();
    cfg[key].push_back(value);
  }
  return cfg;
}

// ---- typed access to resolved values -------------------------------------------------------

const std::string& get(const Config& cfg, const std::string& key) {
  static const std::string empty;
  const auto it = cfg.find(key);
  if (it == cfg.end() || it->second.empty()) return empty;
  return it->second.front();
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto res = std::from_chars(first, last, v);
  if (text.empty() || res.ec != std::errc() || res.ptr != last) {
    throw UsageError("invalid value '" + text + "' for " + flag_name(key));
  }
  return v;
}

std::size_t get_size(const Config& cfg, const std::string& key) {
  return parse_number<std::size_t>(key, get(cfg, key));
}
std::uint64_t get_u64(const Config& cfg, const std::string& key) {
  return parse_number<std::uint64_t>(key, get(cfg, key));
}
double get_double(const Config& cfg, const std::string& key) {
  const double v = parse_number<double>(key, get(cfg, key));
  if (!std::isfinite(v)) throw UsageError("non-finite value for " + flag_name(key));
  return v;
}
bool get_bool(const Config& cfg, const std::string& key) {
  const std::string& v = get(cfg, key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw UsageError("invalid boolean '" + v + "' for " + flag_name(key));
}
std::vector<std::size_t> get_sizes(const Config& cfg, const std::string& key) {
  std::vector<std::size_t> out;
  const std::string& v = get(cfg, key);
  if (v.empty() || v == "none") return out;
  for (const auto& tok : split(v, ',')) out.push_back(parse_number<std::size_t>(key, tok));
  return out;
}
fs::path require_path(const Config& cfg, const std::string& key) {
  const std::string& v = get(cfg, key);
  if (v.empty()) throw UsageError("missing required " + flag_name(key));
  return v;
}

// ---- run bookkeeping -----------------------------------------------------------------------

struct Run {
  std::string command;
  std::vector<std::string> args;
  std::vector<KeySpec> keys;
  Config cfg;
  fs::path out_dir;
  std::vector<fs::path> inputs;
  std::vector<std::string> outputs;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;

  fs::path output(const std::string& name) {
    if (std::find(outputs.begin(), outputs.end(), name) == outputs.end()) outputs.push_back(name);
    return out_dir / name;
  }
  void input(const fs::path& p) {
    if (std::find(inputs.begin(), inputs.end(), p) == inputs.end()) inputs.push_back(p);
  }
};

void write_manifest(const Run& run, int exit_code) {
  std::ofstream m = open_out(run.out_dir / "manifest.txt");
  m << "foldgraph-manifest 1\n";
  m << "command " << run.command << "\n";
  for (const auto& a : run.args) m << "arg " << a << "\n";
  for (const auto& k : run.keys) {
    const auto it = run.cfg.find(k.name);
    if (it == run.cfg.end()) continue;
    for (const auto& v : it->second) m << "config " << k.name << " = " << v << "\n";
  }
  m << "seed " << get(run.cfg, "seed") << "\n";
  for (const auto& p : run.inputs) {
    std::error_code ec;
    const std::string sum = fs::is_regular_file(p, ec) ? hex64(artifact_checksum(p)) : "-";
    m << "input " << sum << " " << p.string() << "\n";
  }
  for (const auto& name : run.outputs) m << "output " << name << "\n";
  for (const auto& name : run.outputs) {
    std::error_code ec;
    if (fs::is_regular_file(run.out_dir / name, ec)) {
      m << "checksum " << name << " " << hex64(artifact_checksum(run.out_dir / name)) << "\n";
    }
  }
  m << "exit_code " << exit_code << "\n";
}

// ---- datasets ------------------------------------------------------------------------------

std::vector<fs::path> list_cloud_files(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw UsageError("data directory '" + dir.string() + "' not found");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".xyz" || ext == ".ply")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw UsageError("no .xyz or .ply files in '" + dir.string() + "'");
  return files;
}

/// --input files, then --data directory contents, then --synthetic clouds.
Dataset load_sources(Run& run) {
  const bool normalize = get_bool(run.cfg, "normalize");
  Dataset ds;
  std::vector<fs::path> files;
  if (const auto it = run.cfg.find("input"); it != run.cfg.end()) {
    for (const auto& p : it->second)
      if (!p.empty()) files.emplace_back(p);
  }
  if (!get(run.cfg, "data").empty()) {
    const auto listed = list_cloud_files(get(run.cfg, "data"));
    files.insert(files.end(), listed.begin(), listed.end());
  }
  for (const auto& f : files) {
    std::error_code ec;
    if (!fs::is_regular_file(f, ec)) throw UsageError("input '" + f.string() + "' not found");
    run.input(f);
    PointCloud c = read_cloud(f);
    ds.clouds.push_back(normalize ? normalize_unit_cube(c) : c);
    ds.names.push_back(f.stem().string());
    ds.labels.push_back(f.parent_path().filename().string());
  }
  if (!get(run.cfg, "synthetic").empty()) {
    const std::string& ds_seed = get(run.cfg, "data_seed");
    const std::uint64_t seed = ds_seed.empty() ? get_u64(run.cfg, "seed") : get_u64(run.cfg, "data_seed");
    Dataset syn = make_synthetic(parse_synthetic(get(run.cfg, "synthetic")), seed, normalize);
    ds.clouds.insert(ds.clouds.end(), syn.clouds.begin(), syn.clouds.end());
    ds.names.insert(ds.names.end(), syn.names.begin(), syn.names.end());
    ds.labels.insert(ds.labels.end(), syn.labels.begin(), syn.labels.end());
  }
  if (ds.clouds.empty()) throw UsageError(run.command + ": no input clouds (use --input, --data or --synthetic)");
  return ds;
}

Model load_model(Run& run) {
  const fs::path path = require_path(run.cfg, "checkpoint");
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw UsageError("checkpoint '" + path.string() + "' not found");
  run.input(path);
  Checkpoint ck = load_checkpoint(path);
  return std::move(*ck.model);
}

std::string join_doubles(std::span<const double> v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    s += format_double(v[i]);
  }
  return s;
}

std::string numbered(const std::string& stem, std::size_t i, std::size_t count) {
  return count == 1 ? stem + ".ply" : stem + "_" + std::to_string(i) + ".ply";
}

// ---- commands ------------------------------------------------------------------------------

int cmd_train(Run& run) {
  ModelConfig mcfg;
  mcfg.code_len = get_size(run.cfg, "code_len");
  mcfg.lattice_side = get_size(run.cfg, "lattice_side");
  mcfg.knn_k = get_size(run.cfg, "knn_k");
  mcfg.sigma = get_double(run.cfg, "sigma");
  mcfg.mu = get_double(run.cfg, "mu");
  mcfg.filter = parse_filter(get(run.cfg, "filter"));
  mcfg.encoder_point_widths = get_sizes(run.cfg, "encoder_point_widths");
  mcfg.encoder_code_widths = get_sizes(run.cfg, "encoder_code_widths");
  mcfg.fold_widths = get_sizes(run.cfg, "fold_widths");
  mcfg.fold_inner_dim = get_size(run.cfg, "fold_inner_dim");
  mcfg.topo_hidden = get_size(run.cfg, "topo_hidden");
  mcfg.validate();

  TrainConfig tcfg;
  tcfg.lr = get_double(run.cfg, "lr");
  tcfg.batch_size = get_size(run.cfg, "batch_size");
  tcfg.epochs = get_size(run.cfg, "epochs");
  tcfg.seed = get_u64(run.cfg, "seed");
  tcfg.loss = parse_loss(get(run.cfg, "loss"));
  tcfg.checkpoint_every = get_size(run.cfg, "checkpoint_every");
  tcfg.clip_norm = get_double(run.cfg, "clip_norm");
  tcfg.validate();

  if (get(run.cfg, "data").empty() && get(run.cfg, "synthetic").empty()) {
    throw UsageError("train: missing data (use --data <dir> or --synthetic <spec>)");
  }
  const Dataset ds = load_sources(run);

  std::optional<Model> model;
  TrainState state;
  if (const std::string& resume = get(run.cfg, "resume"); !resume.empty()) {
    std::error_code ec;
    if (!fs::is_regular_file(resume, ec)) throw UsageError("resume checkpoint '" + resume + "' not found");
    run.input(resume);
    Checkpoint ck = load_checkpoint(resume);
    if (!(ck.model_config == mcfg)) throw UsageError("resume: checkpoint model configuration differs from flags");
    model.emplace(std::move(*ck.model));
    state = ck.state;
  } else {
    model.emplace(mcfg, tcfg.seed);
    state.adam = AdamState::zeros(model->parameters());
  }

  const fs::path ckpt = run.output("checkpoint.bin");
  std::ofstream log = open_out(run.output("train.log"));
  std::ofstream clip = open_out(run.output("clip.log"));
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& rec) {
    const std::string line = format_log_line(rec);
    log << line << "\n" << std::flush;
    *run.out << line << "\n";
  };
  hooks.on_notice = [&](const std::string& msg) { clip << msg << "\n" << std::flush; };
  hooks.on_checkpoint = [&](const TrainState& s) { save_checkpoint(ckpt, *model, tcfg, s); };
  train(*model, ds.clouds, tcfg, state, hooks);
  save_checkpoint(ckpt, *model, tcfg, state);
  return 0;
}

/// Top-k entries of row `node` of `a` by weight, self excluded; ties go to the lower index.
std::vector<std::size_t> top_neighbors(const Matrix& a, std::size_t node, std::size_t k) {
  std::vector<std::size_t> idx;
  for (std::size_t j = 0; j < a.cols(); ++j)
    if (j != node) idx.push_back(j);
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t x, std::size_t y) {
                      return a(node, x) != a(node, y) ? a(node, x) > a(node, y) : x < y;
                    });
  idx.resize(k);
  return idx;
}

int cmd_reconstruct(Run& run) {
  const Model model = load_model(run);
  const Dataset ds = load_sources(run);
  const std::size_t n = ds.clouds.size();
  std::ofstream dist = open_out(run.output("distances.txt"));
  std::optional<std::size_t> trace_node;
  if (!get(run.cfg, "trace_node").empty()) {
    trace_node = get_size(run.cfg, "trace_node");
    if (*trace_node >= model.lattice().size()) {
      throw UsageError("--trace-node " + std::to_string(*trace_node) + " outside the lattice of " +
                       std::to_string(model.lattice().size()) + " nodes");
    }
  }
  const std::size_t trace_input = get_size(run.cfg, "trace_input");
  if (trace_node && trace_input >= n) throw UsageError("--trace-input out of range");

  for (std::size_t i = 0; i < n; ++i) {
    const Reconstruction rec = model.reconstruct(ds.clouds[i]);
    write_ply_ascii(run.output(numbered("coarse", i, n)), rec.coarse);
    write_ply_ascii(run.output(numbered("refined", i, n)), rec.refined);
    const PointCloud& src = ds.clouds[i];
    dist << ds.names[i] << " refined_cd " << format_double(chamfer_plain(src, rec.refined))
         << " refined_augcd " << format_double(augmented_chamfer(src, rec.refined).first)
         << " coarse_cd " << format_double(chamfer_plain(src, rec.coarse)) << " coarse_augcd "
         << format_double(augmented_chamfer(src, rec.coarse).first) << "\n";

    if (trace_node && i == trace_input) {
      std::size_t k = get_size(run.cfg, "trace_k");
      if (k == 0) k = model.config().knn_k;
      const auto nb = top_neighbors(rec.adjacency, *trace_node, k);
      std::vector<double> colour(rec.refined.size(), 0.0);
      for (std::size_t j : nb) colour[j] = 1.0;
      colour[*trace_node] = 2.0;
      write_ply_ascii(run.output("trace.ply"), rec.refined.with_scalar(colour));
      std::ofstream t = open_out(run.output("trace_neighbors.txt"));
      for (std::size_t j : nb) t << j << " " << format_double(rec.adjacency(*trace_node, j)) << "\n";
    }
  }
  return 0;
}

int cmd_encode(Run& run) {
  const Model model = load_model(run);
  const Dataset ds = load_sources(run);
  std::ofstream codes = open_out(run.output("codes.txt"));
  std::ofstream names = open_out(run.output("inputs.txt"));
  std::ofstream labels = open_out(run.output("labels.txt"));
  for (std::size_t i = 0; i < ds.clouds.size(); ++i) {
    codes << join_doubles(model.encode(ds.clouds[i])) << "\n";
    names << ds.names[i] << "\n";
    labels << ds.labels[i] << "\n";
  }
  return 0;
}

int cmd_spectra(Run& run) {
  const Model model = load_model(run);
  const Dataset ds = load_sources(run);
  const Reconstruction rec = model.reconstruct(ds.clouds.front());
  const Matrix lap = laplacian_matrix(rec.adjacency);
  const LaplacianSpectrum spec = eig_symmetric(lap);
  write_spectrum(run.output("spectrum.txt"), spec.eigenvalues);
  const std::size_t m = spec.eigenvalues.size();
  for (std::size_t c = 0; c < std::min<std::size_t>(4, m); ++c) {
    std::vector<double> col(m);
    for (std::size_t r = 0; r < m; ++r) col[r] = spec.eigenvectors(r, c);
    write_ply_ascii(run.output("eigvec_" + std::to_string(c + 1) + ".ply"), rec.refined.with_scalar(col));
  }
  double lo = spec.eigenvectors(0, 0), hi = lo;
  for (std::size_t r = 1; r < m; ++r) {
    lo = std::min(lo, spec.eigenvectors(r, 0));
    hi = std::max(hi, spec.eigenvectors(r, 0));
  }
  const double lambda1 = spec.eigenvalues.front();
  const double residual = reconstruction_residual(lap, spec);
  const double ortho = orthogonality_defect(spec);
  const double spread = hi - lo;
  const bool pass = std::abs(lambda1) <= 1e-8 && residual < 1e-8 && spread < 1e-6;
  std::ofstream rep = open_out(run.output("spectrum_report.txt"));
  for (std::ostream* s : {static_cast<std::ostream*>(&rep), run.out}) {
    *s << "lambda1 " << format_double(lambda1) << "\n"
       << "residual " << format_double(residual) << "\n"
       << "orthogonality " << format_double(ortho) << "\n"
       << "first_eigvec_spread " << format_double(spread) << "\n"
       << (pass ? "PASS" : "FAIL") << "\n";
  }
  return pass ? 0 : 1;
}

int cmd_alpha_sweep(Run& run) {
  const Model model = load_model(run);
  const Dataset ds = load_sources(run);
  const FilterKind model_filter = model.config().filter;
  FilterKind family = model_filter == FilterKind::none ? FilterKind::adjacency : model_filter;
  if (!get(run.cfg, "family").empty()) family = parse_filter(get(run.cfg, "family"));
  if (family == FilterKind::none) throw UsageError("--family must be adjacency or laplacian");

  const PointCloud& src = ds.clouds.front();
  const Reconstruction rec = model.reconstruct(src);
  std::ofstream table = open_out(run.output("alpha_table.txt"));
  const std::vector<std::pair<double, std::string>> alphas = {
      {0.0, "0"}, {0.25, "0.25"}, {0.5, "0.5"}, {0.75, "0.75"}, {1.0, "1"}};
  for (const auto& [alpha, label] : alphas) {
    PointCloud cloud;
    if (alpha == 0.0) {
      cloud = rec.coarse;
    } else if (alpha == 0.5 && family == model_filter) {
      cloud = rec.refined;
    } else if (family == FilterKind::adjacency) {
      cloud = PointCloud(alpha_filter_adjacency(rec.adjacency, rec.coarse.points(), alpha));
    } else {
      cloud = PointCloud(alpha_filter_laplacian(rec.adjacency, rec.coarse.points(), model.config().mu, alpha));
    }
    write_ply_ascii(run.output("alpha_" + label + ".ply"), cloud);
    table << "alpha " << label << " cd " << format_double(chamfer_plain(src, cloud)) << " augcd "
          << format_double(augmented_chamfer(src, cloud).first) << "\n";
  }
  return 0;
}

PointCloud uniform_cloud(std::size_t n, Rng& rng) {
  Matrix pts(n, 3);
  for (double& v : pts.values()) v = rng.uniform();
  return PointCloud(std::move(pts));
}

/// One proxy per occupied voxel plus `extra` random points inside occupied voxels.
PointCloud voxel_cloud(std::size_t k_res, const std::vector<std::array<std::size_t, 3>>& voxels,
                       std::size_t extra, Rng& rng) {
  Matrix pts(voxels.size() + extra, 3);
  const double kd = static_cast<double>(k_res);
  for (std::size_t r = 0; r < pts.rows(); ++r) {
    const bool centre = r < voxels.size();
    const auto& v = centre ? voxels[r] : voxels[rng.below(voxels.size())];
    for (int a = 0; a < 3; ++a) {
      const double u = centre ? 0.5 : rng.uniform(0.05, 0.95);
      pts(r, a) = (static_cast<double>(v[a]) + u) / kd;
    }
  }
  return PointCloud(std::move(pts));
}

int cmd_certify(Run& run) {
  const std::size_t k_max = get_size(run.cfg, "k_max");
  const std::size_t clouds = get_size(run.cfg, "clouds");
  const std::size_t cloud_points = get_size(run.cfg, "cloud_points");
  const std::vector<std::size_t> thm2_k = get_sizes(run.cfg, "thm2_k");
  const std::size_t thm3_pairs = get_size(run.cfg, "thm3_pairs");
  const std::size_t thm4_graphs = get_size(run.cfg, "thm4_graphs");
  const std::size_t thm4_signals = get_size(run.cfg, "thm4_signals");
  const double mu = get_double(run.cfg, "mu");
  const std::uint64_t seed = get_u64(run.cfg, "seed");
  const ProxyMode mode = get_bool(run.cfg, "corner_proxy") ? ProxyMode::corner : ProxyMode::center;
  if (k_max == 0 || clouds == 0 || cloud_points == 0) throw UsageError("certify: sizes must be positive");

  std::ofstream certs = open_out(run.output("certificates.txt"));
  bool all_pass = true;
  auto emit = [&](const Certificate& c) {
    certs << c.format() << "\n";
    *run.out << c.format() << "\n";
    all_pass = all_pass && c.pass;
  };

  Rng thm1_rng = Rng::derive(seed, 1);
  for (std::size_t k = 1; k <= k_max; ++k) {
    Certificate worst;
    for (std::size_t c = 0; c < clouds; ++c) {
      const Certificate cert = certify_thm1(uniform_cloud(cloud_points, thm1_rng), k, mode);
      if (c == 0 || (worst.pass && (!cert.pass || cert.distance > worst.distance))) worst = cert;
    }
    emit(worst);
  }

  Rng thm2_rng = Rng::derive(seed, 2);
  std::ofstream constants = open_out(run.output("constants.txt"));
  for (std::size_t k : thm2_k) {
    if (k == 0) throw UsageError("--thm2-k entries must be positive");
    // Full cube, then slabs of every thickness along each axis.
    std::vector<std::vector<std::array<std::size_t, 3>>> shapes;
    for (std::size_t axis = 0; axis < 3; ++axis) {
      for (std::size_t layers = 1; layers <= k; ++layers) {
        if (layers == k && axis > 0) break;
        std::vector<std::array<std::size_t, 3>> vox;
        for (std::size_t i = 0; i < k; ++i)
          for (std::size_t j = 0; j < k; ++j)
            for (std::size_t l = 0; l < k; ++l) {
              const std::array<std::size_t, 3> t{i, j, l};
              if (t[axis] < layers) vox.push_back(t);
            }
        shapes.push_back(std::move(vox));
      }
    }
    Certificate worst;
    bool first = true;
    for (const auto& vox : shapes) {
      Certificate cert;
      try {
        cert = certify_thm2(voxel_cloud(k, vox, cloud_points, thm2_rng), k);
      } catch (const PreconditionError& e) {
        *run.err << "certify: " << e.what() << "\n";
        cert.theorem = 2;
        cert.k_res = k;
        cert.pass = false;
      }
      if (first || (worst.pass && (!cert.pass || cert.distance > worst.distance))) worst = cert;
      first = false;
    }
    emit(worst);
    const double c_len = static_cast<double>(worst.code_len);
    const bool tighter = thm2_bound(c_len) < thm1_bound(c_len);
    std::ostringstream line;
    line << "constants K " << k << " C " << worst.code_len << " thm2 " << format_double(thm2_bound(c_len))
         << " thm1 " << format_double(thm1_bound(c_len)) << (tighter ? " PASS" : " FAIL");
    *run.out << line.str() << "\n";
    constants << line.str() << "\n";
    all_pass = all_pass && tighter;
  }

  {
    Rng rng = Rng::derive(seed, 3);
    double worst_residual = 0.0;
    bool pass = true;
    auto check = [&](std::span<const double> x1, std::span<const double> x2) {
      const Matrix a = solve_zero_tv(x1, x2);
      for (auto x : {x1, x2}) {
        double r2 = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
          double ax = 0.0;
          for (std::size_t j = 0; j < x.size(); ++j) ax += a(i, j) * x[j];
          r2 += (ax - x[i]) * (ax - x[i]);
        }
        worst_residual = std::max(worst_residual, std::sqrt(r2));
      }
      pass = pass && frobenius_norm(add(a, scaled(Matrix::identity(x1.size()), -1.0))) > 1e-8;
    };
    for (std::size_t p = 0; p < thm3_pairs; ++p) {
      const std::size_t m = 3 + rng.below(30);
      std::vector<double> x1(m), x2(m);
      for (double& v : x1) v = rng.normal();
      for (double& v : x2) v = rng.normal();
      check(x1, x2);
    }
    const ZShapeExample z = z_shape_example();
    check(z.x1, z.x2);
    const double printed = std::max(graph_tv(z.adjacency, z.x1), graph_tv(z.adjacency, z.x2));
    pass = pass && printed < 1e-10 && worst_residual < 1e-10;
    Certificate c{3, 0, thm3_pairs + 1, std::max(worst_residual, printed), 1e-10, pass};
    emit(c);
  }

  {
    Rng rng = Rng::derive(seed, 4);
    std::size_t violations = 0, lap_violations = 0;
    double worst = 0.0, lap_worst = 0.0;
    for (std::size_t g = 0; g < thm4_graphs; ++g) {
      const std::size_t m = 3 + rng.below(30);
      const Matrix a = random_stochastic_graph(m, 0.3, rng);
      const VariationReport tv = check_tv_decrease(a, thm4_signals, rng.next());
      violations += tv.violations;
      worst = std::max(worst, -tv.worst_margin);
      const VariationReport lap = check_laplacian_smoothing(a, mu, thm4_signals, rng.next());
      lap_violations += lap.violations;
      lap_worst = std::max(lap_worst, -lap.worst_margin);
    }
    Certificate c{4, 0, thm4_graphs * thm4_signals, worst, 1e-10, violations == 0};
    emit(c);
    std::ostringstream line;
    line << "laplacian mu " << format_double(mu) << " graphs " << thm4_graphs << " signals " << thm4_signals
         << " violations " << lap_violations << " worst_increase " << format_double(lap_worst)
         << (lap_violations == 0 ? " PASS" : " FAIL");
    std::ofstream(run.output("laplacian_check.txt")) << line.str() << "\n";
    *run.out << line.str() << "\n";
    all_pass = all_pass && lap_violations == 0;
  }
  return all_pass ? 0 : 1;
}

Matrix read_codes(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<double> values;
  std::size_t cols = 0, rows = 0, line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tok;
    std::size_t count = 0;
    while (ls >> tok) {
      double v = 0.0;
      const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
        throw ParseError("bad number '" + tok + "' in " + path.string(), line_no);
      }
      values.push_back(v);
      ++count;
    }
    if (count == 0) continue;
    if (rows == 0) cols = count;
    if (count != cols) throw ParseError("expected " + std::to_string(cols) + " values in " + path.string(), line_no);
    ++rows;
  }
  if (rows == 0) throw UsageError("no codes in '" + path.string() + "'");
  return Matrix(rows, cols, std::move(values));
}

std::vector<std::string> read_labels(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

int cmd_classify(Run& run) {
  const fs::path train_codes = require_path(run.cfg, "train_codes");
  const fs::path train_labels = require_path(run.cfg, "train_labels");
  const fs::path test_codes = require_path(run.cfg, "test_codes");
  const fs::path test_labels = require_path(run.cfg, "test_labels");
  for (const auto& p : {train_codes, train_labels, test_codes, test_labels}) run.input(p);
  const Matrix xtr = read_codes(train_codes);
  const Matrix xte = read_codes(test_codes);
  const auto ytr_names = read_labels(train_labels);
  const auto yte_names = read_labels(test_labels);
  if (ytr_names.size() != xtr.rows() || yte_names.size() != xte.rows()) {
    throw UsageError("classify: label count does not match code count (train " + std::to_string(xtr.rows()) +
                     " codes / " + std::to_string(ytr_names.size()) + " labels, test " +
                     std::to_string(xte.rows()) + " codes / " + std::to_string(yte_names.size()) + " labels)");
  }
  if (xtr.cols() != xte.cols()) throw UsageError("classify: train and test codes differ in length");

  std::set<std::string> names(ytr_names.begin(), ytr_names.end());
  names.insert(yte_names.begin(), yte_names.end());
  const std::vector<std::string> classes(names.begin(), names.end());
  auto index_of = [&](const std::vector<std::string>& ys) {
    std::vector<std::size_t> out;
    for (const auto& y : ys)
      out.push_back(static_cast<std::size_t>(std::lower_bound(classes.begin(), classes.end(), y) - classes.begin()));
    return out;
  };
  const auto ytr = index_of(ytr_names);
  const auto yte = index_of(yte_names);

  ClassifierConfig ccfg;
  ccfg.epochs = get_size(run.cfg, "epochs");
  ccfg.lr = get_double(run.cfg, "lr");
  ccfg.l2 = get_double(run.cfg, "l2");
  ccfg.seed = get_u64(run.cfg, "seed");
  const LinearClassifier clf = fit_classifier(xtr, ytr, ccfg);
  const auto ptr = classify(clf, xtr);
  const auto pte = classify(clf, xte);
  const double train_acc = accuracy(ptr, ytr);
  const double test_acc = accuracy(pte, yte);

  std::ofstream rep = open_out(run.output("classify_report.txt"));
  for (std::ostream* s : {static_cast<std::ostream*>(&rep), run.out}) {
    *s << "train_accuracy " << format_double(train_acc) << "\n"
       << "test_accuracy " << format_double(test_acc) << "\n";
  }
  std::ofstream pred = open_out(run.output("predictions.txt"));
  for (std::size_t p : pte) pred << classes[p] << "\n";
  return 0;
}

struct Manifest {
  std::string command;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<std::pair<std::string, std::string>> inputs;  // checksum, path
  std::vector<std::pair<std::string, std::string>> checksums;
  int exit_code = 0;
};

Manifest read_manifest(const fs::path& path) {
  std::istringstream in(read_text(path));
  Manifest m;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line != "foldgraph-manifest 1") throw ParseError("not a foldgraph manifest", 1);
      continue;
    }
    const auto sp = line.find(' ');
    const std::string tag = line.substr(0, sp);
    const std::string rest = sp == std::string::npos ? "" : line.substr(sp + 1);
    if (tag == "command") {
      m.command = rest;
    } else if (tag == "config") {
      const auto eq = rest.find(" = ");
      if (eq == std::string::npos) throw ParseError("malformed config line", line_no);
      m.config.emplace_back(rest.substr(0, eq), rest.substr(eq + 3));
    } else if (tag == "input") {
      const auto s2 = rest.find(' ');
      if (s2 == std::string::npos) throw ParseError("malformed input line", line_no);
      m.inputs.emplace_back(rest.substr(0, s2), rest.substr(s2 + 1));
    } else if (tag == "checksum") {
      const auto s2 = rest.rfind(' ');
      if (s2 == std::string::npos) throw ParseError("malformed checksum line", line_no);
      m.checksums.emplace_back(rest.substr(0, s2), rest.substr(s2 + 1));
    } else if (tag == "exit_code") {
      m.exit_code = parse_number<int>("exit_code", rest);
    }
  }
  if (line_no == 0) throw ParseError("empty manifest", 1);
  if (m.command.empty()) throw ParseError("manifest has no command", line_no);
  return m;
}

int cmd_replay(const fs::path& manifest_path, const std::string& out_flag, std::ostream& out, std::ostream& err) {
  std::error_code ec;
  if (!fs::is_regular_file(manifest_path, ec)) throw UsageError("manifest '" + manifest_path.string() + "' not found");
  const Manifest m = read_manifest(manifest_path);
  std::string orig_out;
  std::vector<std::string> args{m.command};
  for (const auto& [key, value] : m.config) {
    if (key == "out") {
      orig_out = value;
      continue;
    }
    if (key == "corner_proxy") {
      if (value == "true") args.push_back("--corner-proxy");
      continue;
    }
    if (value.empty()) continue;
    args.push_back(flag_name(key));
    args.push_back(value);
  }
  const fs::path replay_out =
      out_flag.empty() ? fs::path(orig_out) / "replay" : fs::absolute(out_flag).lexically_normal();
  args.push_back("--out");
  args.push_back(replay_out.string());

  bool ok = true;
  for (const auto& [sum, path] : m.inputs) {
    const std::string now = fs::is_regular_file(path, ec) ? hex64(artifact_checksum(path)) : "-";
    if (now != sum) {
      err << "replay: input " << path << " changed since the recorded run\n";
      ok = false;
    }
  }
  const int code = run(args, out, err);
  if (code != m.exit_code) {
    err << "replay: exit code " << code << " differs from recorded " << m.exit_code << "\n";
    ok = false;
  }
  for (const auto& [name, sum] : m.checksums) {
    const fs::path p = replay_out / name;
    const std::string now = fs::is_regular_file(p, ec) ? hex64(artifact_checksum(p)) : "missing";
    const bool match = now == sum;
    out << (match ? "match " : "mismatch ") << name << "\n";
    ok = ok && match;
  }
  out << (ok ? "replay identical" : "replay differs") << "\n";
  return ok ? 0 : 1;
}

}  // namespace

std::vector<SyntheticSpec> parse_synthetic(std::string_view text) {
  std::vector<SyntheticSpec> specs;
  auto set_param = [](SyntheticSpec& spec, const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("synthetic: malformed parameter '" + kv + "'");
    const std::string key = trim(kv.substr(0, eq));
    const std::string val = trim(kv.substr(eq + 1));
    double v = 0.0;
    const auto res = std::from_chars(val.data(), val.data() + val.size(), v);
    if (val.empty() || res.ec != std::errc() || res.ptr != val.data() + val.size() || !std::isfinite(v)) {
      throw UsageError("synthetic: bad value in '" + kv + "'");
    }
    spec.params[key] = v;
  };
  for (const auto& tok : split(text, ',')) {
    if (tok.empty()) throw UsageError("synthetic: empty entry in '" + std::string(text) + "'");
    if (tok.find(':') != std::string::npos) {
      const auto parts = split(tok, ':');
      if (parts.size() < 3) throw UsageError("synthetic: expected shape:count:n_points in '" + tok + "'");
      SyntheticSpec spec;
      try {
        spec.shape = parse_shape(parts[0]);
      } catch (const DomainError& e) {
        throw UsageError(std::string("synthetic: ") + e.what());
      }
      spec.count = parse_number<std::size_t>("synthetic", parts[1]);
      spec.n_points = parse_number<std::size_t>("synthetic", parts[2]);
      if (spec.count == 0 || spec.n_points == 0) throw UsageError("synthetic: zero count or points in '" + tok + "'");
      for (std::size_t i = 3; i < parts.size(); ++i) set_param(spec, parts[i]);
      specs.push_back(std::move(spec));
    } else {
      if (specs.empty()) throw UsageError("synthetic: parameter '" + tok + "' before any shape");
      set_param(specs.back(), tok);
    }
  }
  return specs;
}

Dataset make_synthetic(const std::vector<SyntheticSpec>& specs, std::uint64_t seed, bool normalize) {
  Dataset ds;
  std::uint64_t t = 0;
  for (const auto& spec : specs) {
    for (std::size_t i = 0; i < spec.count; ++i, ++t) {
      const std::uint64_t s = Rng::derive(seed, t).next();
      PointCloud c = sample_synthetic(spec.shape, spec.n_points, spec.params, s);
      ds.clouds.push_back(normalize ? normalize_unit_cube(c) : std::move(c));
      ds.names.push_back(std::string(shape_name(spec.shape)) + "_" + std::to_string(t));
      ds.labels.emplace_back(shape_name(spec.shape));
    }
  }
  return ds;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t artifact_checksum(const fs::path& path) {
  const std::string text = read_text(path);
  if (path.filename() != "train.log") return fnv1a64(text);
  std::string kept;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto w = line.find(" wallclock_s ");
    kept += line.substr(0, w);
    kept += '\n';
  }
  return fnv1a64(kept);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Folding point-cloud autoencoder with graph filtering", "foldgraph"};
  app.require_subcommand(1);
  std::map<std::string, std::map<std::string, std::string>> scalar;
  std::map<std::string, std::map<std::string, std::vector<std::string>>> multi;
  std::map<std::string, std::map<std::string, bool>> flags;
  std::map<std::string, std::string> config_path;
  std::string manifest_path, replay_out;
  std::map<std::string, CLI::App*> subs;
  for (const auto& cmd : kCommands) {
    CLI::App* sub = app.add_subcommand(cmd, kDescriptions.at(cmd));
    subs[cmd] = sub;
    if (cmd == "replay") {
      sub->add_option("--manifest", manifest_path, "manifest.txt of an earlier run")->required();
      sub->add_option("--out", replay_out, "output directory (default <recorded out>/replay)");
      continue;
    }
    sub->add_option("--config", config_path[cmd], "file of 'key = value' lines");
    for (const auto& k : keys_for(cmd)) {
      if (k.flag) {
        sub->add_flag(flag_name(k.name), flags[cmd][k.name]);
      } else if (k.multi) {
        sub->add_option(flag_name(k.name), multi[cmd][k.name]);
      } else {
        sub->add_option(flag_name(k.name), scalar[cmd][k.name], "default: " + (k.def.empty() ? "unset" : k.def));
      }
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    for (const auto& [name, sub] : subs) {
      if (sub->parsed()) {
        out << sub->help();
        return 0;
      }
    }
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "foldgraph: " << e.what() << "\n";
    for (const auto& [name, sub] : subs) {
      if (sub->parsed()) {
        err << sub->help();
        return 2;
      }
    }
    err << app.help();
    return 2;
  }

  std::string cmd;
  for (const auto& [name, sub] : subs)
    if (sub->parsed()) cmd = name;

  try {
    if (cmd == "replay") return cmd_replay(manifest_path, replay_out, out, err);
  } catch (const NumericalError& e) {
    err << "foldgraph: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "foldgraph: " << e.what() << "\n";
    return 2;
  }

  Run r;
  r.command = cmd;
  r.args = args;
  r.keys = keys_for(cmd);
  r.out = &out;
  r.err = &err;
  try {
    Config file;
    if (!config_path[cmd].empty()) {
      const fs::path cp = fs::absolute(config_path[cmd]);
      r.input(cp);
      file = read_config_file(cp, r.keys);
    }
    CLI::App* sub = subs[cmd];
    for (const auto& k : r.keys) {
      const bool given = sub->get_option(flag_name(k.name))->count() > 0;
      std::vector<std::string> vals;
      if (given) {
        if (k.flag) vals = {flags[cmd][k.name] ? "true" : "false"};
        else if (k.multi) vals = multi[cmd][k.name];
        else vals = {scalar[cmd][k.name]};
        if (k.path) {
          for (auto& v : vals)
            if (!v.empty()) v = fs::absolute(v).lexically_normal().string();
        }
      } else if (file.count(k.name)) {
        vals = file[k.name];
      } else if (!k.multi) {
        vals = {k.def};
      }
      if (!k.multi && vals.size() > 1) vals = {vals.back()};
      r.cfg[k.name] = vals;
    }
    const std::string& out_dir = get(r.cfg, "out");
    if (out_dir.empty()) throw UsageError(cmd + ": missing required --out <dir>");
    r.out_dir = out_dir;
    fs::create_directories(r.out_dir);
  } catch (const std::exception& e) {
    err << "foldgraph: " << e.what() << "\n";
    return 2;
  }

  int code = 0;
  try {
    if (cmd == "train") code = cmd_train(r);
    else if (cmd == "reconstruct") code = cmd_reconstruct(r);
    else if (cmd == "encode") code = cmd_encode(r);
    else if (cmd == "spectra") code = cmd_spectra(r);
    else if (cmd == "alpha-sweep") code = cmd_alpha_sweep(r);
    else if (cmd == "certify") code = cmd_certify(r);
    else if (cmd == "classify") code = cmd_classify(r);
  } catch (const NumericalError& e) {
    err << "foldgraph: " << e.what() << "\n";
    code = 1;
  } catch (const std::exception& e) {
    err << "foldgraph: " << e.what() << "\n";
    code = 2;
  }
  try {
    write_manifest(r, code);
  } catch (const std::exception& e) {
    err << "foldgraph: cannot write manifest: " << e.what() << "\n";
    return 2;
  }
  return code;
}

}  // namespace foldgraph::cli
