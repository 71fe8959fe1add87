#include "foldgraph/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "foldgraph/errors.hpp"

namespace foldgraph {

namespace {

constexpr char kMagic[8] = {'F', 'G', 'C', 'H', 'K', 'P', 'T', '1'};

template <typename T>
void put(std::string& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::vector<unsigned char> bytes) : bytes_(std::move(bytes)) {}

  std::size_t offset() const noexcept { return pos_; }
  std::size_t size() const noexcept { return bytes_.size(); }

  template <typename T>
  T get(const char* what) {
    if (bytes_.size() - pos_ < sizeof(T)) {
      throw LoadError(std::string("truncated ") + what, pos_);
    }
    unsigned char b[sizeof(T)];
    std::memcpy(b, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    }
    T v;
    std::memcpy(&v, b, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string bytes(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) throw LoadError(std::string("truncated ") + what, pos_);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
};

struct ParsedTable {
  std::vector<ArrayEntry> entries;
  std::vector<std::size_t> offsets;
  std::size_t file_size = 0;
};

ParsedTable parse_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
  std::vector<unsigned char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(std::move(raw));
  ParsedTable out;
  out.file_size = r.size();

  if (r.bytes(sizeof kMagic, "magic") != std::string(kMagic, sizeof kMagic)) {
    throw LoadError("bad magic, not a checkpoint file", 0);
  }
  const std::size_t version_at = r.offset();
  const auto version = r.get<std::uint32_t>("format version");
  if (version != kCheckpointVersion) {
    throw LoadError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                        std::to_string(kCheckpointVersion) + ")",
                    version_at);
  }
  const auto count = r.get<std::uint32_t>("entry count");
  for (std::uint32_t e = 0; e < count; ++e) {
    out.offsets.push_back(r.offset());
    ArrayEntry entry;
    const auto name_len = r.get<std::uint32_t>("name length");
    entry.name = r.bytes(name_len, "name");
    const auto rank = r.get<std::uint32_t>("rank");
    if (rank > 8) throw LoadError("implausible rank " + std::to_string(rank), r.offset() - 4);
    std::uint64_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      entry.extents.push_back(r.get<std::uint64_t>("extent"));
      n *= entry.extents.back();
    }
    if (n > (r.size() - r.offset()) / sizeof(double)) {
      throw LoadError("truncated payload of '" + entry.name + "'", r.offset());
    }
    entry.data.resize(n);
    for (auto& x : entry.data) x = r.get<double>("payload");
    out.entries.push_back(std::move(entry));
  }
  if (r.offset() != r.size()) throw LoadError("trailing bytes after the last entry", r.offset());
  return out;
}

// ---- config <-> entries --------------------------------------------------------------------

void put_scalar(std::vector<ArrayEntry>& out, const std::string& name, double v) {
  out.push_back(ArrayEntry{name, {1}, {v}});
}

void put_list(std::vector<ArrayEntry>& out, const std::string& name, const std::vector<std::size_t>& v) {
  ArrayEntry e{name, {v.size()}, {}};
  for (const std::size_t x : v) e.data.push_back(static_cast<double>(x));
  out.push_back(std::move(e));
}

void put_u64(std::vector<ArrayEntry>& out, const std::string& name, std::uint64_t v) {
  out.push_back(ArrayEntry{name, {2}, {static_cast<double>(v & 0xffffffffULL), static_cast<double>(v >> 32)}});
}

class EntryIndex {
 public:
  explicit EntryIndex(const ParsedTable& t) : table_(t) {
    for (std::size_t i = 0; i < t.entries.size(); ++i) by_name_[t.entries[i].name] = i;
  }

  const ArrayEntry& at(const std::string& name) const {
    const auto it = by_name_.find(name);
    if (it == by_name_.end()) throw LoadError("missing entry '" + name + "'", table_.file_size);
    return table_.entries[it->second];
  }
  std::size_t offset_of(const std::string& name) const { return table_.offsets[by_name_.at(name)]; }

  double scalar(const std::string& name) const {
    const ArrayEntry& e = at(name);
    if (e.data.size() != 1) throw LoadError("entry '" + name + "' is not a scalar", offset_of(name));
    return e.data[0];
  }

  std::size_t count(const std::string& name) const { return to_count(scalar(name), name); }

  std::vector<std::size_t> list(const std::string& name) const {
    std::vector<std::size_t> out;
    for (const double x : at(name).data) out.push_back(to_count(x, name));
    return out;
  }

  std::uint64_t u64(const std::string& name) const {
    const ArrayEntry& e = at(name);
    if (e.data.size() != 2) throw LoadError("entry '" + name + "' is not a u64 pair", offset_of(name));
    return static_cast<std::uint64_t>(to_count(e.data[0], name)) |
           (static_cast<std::uint64_t>(to_count(e.data[1], name)) << 32);
  }

 private:
  std::size_t to_count(double x, const std::string& name) const {
    if (!(x >= 0.0 && x <= 9007199254740992.0) || std::floor(x) != x) {
      throw LoadError("entry '" + name + "' holds a non-integer count", offset_of(name));
    }
    return static_cast<std::size_t>(x);
  }

  const ParsedTable& table_;
  std::map<std::string, std::size_t> by_name_;
};

}  // namespace

void write_array_table(const std::filesystem::path& path, const std::vector<ArrayEntry>& entries) {
  std::string buf(kMagic, sizeof kMagic);
  put<std::uint32_t>(buf, kCheckpointVersion);
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(entries.size()));
  for (const ArrayEntry& e : entries) {
    std::uint64_t n = 1;
    for (const auto x : e.extents) n *= x;
    if (n != e.data.size()) {
      throw DimensionError("array '" + e.name + "' holds " + std::to_string(e.data.size()) +
                           " values but its extents give " + std::to_string(n));
    }
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(e.name.size()));
    buf += e.name;
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(e.extents.size()));
    for (const auto x : e.extents) put<std::uint64_t>(buf, x);
    for (const double x : e.data) put<double>(buf, x);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  out.flush();
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

std::vector<ArrayEntry> read_array_table(const std::filesystem::path& path) {
  return parse_table(path).entries;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const TrainConfig& cfg,
                     const TrainState& state) {
  std::vector<ArrayEntry> e;
  const ModelConfig& mc = model.config();
  put_scalar(e, "config.code_len", static_cast<double>(mc.code_len));
  put_scalar(e, "config.lattice_side", static_cast<double>(mc.lattice_side));
  put_scalar(e, "config.knn_k", static_cast<double>(mc.knn_k));
  put_scalar(e, "config.sigma", mc.sigma);
  put_scalar(e, "config.mu", mc.mu);
  put_scalar(e, "config.filter", static_cast<double>(mc.filter));
  put_list(e, "config.encoder_point_widths", mc.encoder_point_widths);
  put_list(e, "config.encoder_code_widths", mc.encoder_code_widths);
  put_list(e, "config.fold_widths", mc.fold_widths);
  put_scalar(e, "config.fold_inner_dim", static_cast<double>(mc.fold_inner_dim));
  put_scalar(e, "config.topo_hidden", static_cast<double>(mc.topo_hidden));

  put_scalar(e, "config.lr", cfg.lr);
  put_scalar(e, "config.batch_size", static_cast<double>(cfg.batch_size));
  put_scalar(e, "config.epochs", static_cast<double>(cfg.epochs));
  put_scalar(e, "config.beta1", cfg.beta1);
  put_scalar(e, "config.beta2", cfg.beta2);
  put_scalar(e, "config.eps", cfg.eps);
  put_u64(e, "config.seed", cfg.seed);
  put_scalar(e, "config.loss", static_cast<double>(cfg.loss));
  put_scalar(e, "config.checkpoint_every", static_cast<double>(cfg.checkpoint_every));
  put_scalar(e, "config.clip_norm", cfg.clip_norm);

  const ParameterList& params = model.parameters();
  for (const auto& [name, t] : params) {
    ArrayEntry a{"param." + name, {}, {t.values().begin(), t.values().end()}};
    for (const auto x : t.shape()) a.extents.push_back(x);
    e.push_back(std::move(a));
  }
  const bool has_moments = state.adam.m.size() == params.size();
  for (std::size_t p = 0; p < params.size(); ++p) {
    const std::vector<double> zero(params[p].second.size(), 0.0);
    e.push_back(ArrayEntry{"adam.m." + params[p].first, {zero.size()}, has_moments ? state.adam.m[p] : zero});
    e.push_back(ArrayEntry{"adam.v." + params[p].first, {zero.size()}, has_moments ? state.adam.v[p] : zero});
  }
  put_u64(e, "state.step", state.adam.step);
  put_u64(e, "state.epoch", state.epochs_done);
  // Every shuffle is drawn from a stream derived from (seed, epoch), so the
  // seed and the epoch counter are the complete generator state.
  put_u64(e, "state.rng_seed", cfg.seed);
  write_array_table(path, e);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const ParsedTable table = parse_table(path);
  const EntryIndex idx(table);

  Checkpoint ck;
  ModelConfig& mc = ck.model_config;
  mc.code_len = idx.count("config.code_len");
  mc.lattice_side = idx.count("config.lattice_side");
  mc.knn_k = idx.count("config.knn_k");
  mc.sigma = idx.scalar("config.sigma");
  mc.mu = idx.scalar("config.mu");
  const std::size_t filter = idx.count("config.filter");
  if (filter > 2) throw LoadError("unknown filter code", idx.offset_of("config.filter"));
  mc.filter = static_cast<FilterKind>(filter);
  mc.encoder_point_widths = idx.list("config.encoder_point_widths");
  mc.encoder_code_widths = idx.list("config.encoder_code_widths");
  mc.fold_widths = idx.list("config.fold_widths");
  mc.fold_inner_dim = idx.count("config.fold_inner_dim");
  mc.topo_hidden = idx.count("config.topo_hidden");

  TrainConfig& tc = ck.train_config;
  tc.lr = idx.scalar("config.lr");
  tc.batch_size = idx.count("config.batch_size");
  tc.epochs = idx.count("config.epochs");
  tc.beta1 = idx.scalar("config.beta1");
  tc.beta2 = idx.scalar("config.beta2");
  tc.eps = idx.scalar("config.eps");
  tc.seed = idx.u64("config.seed");
  const std::size_t loss = idx.count("config.loss");
  if (loss > 1) throw LoadError("unknown loss code", idx.offset_of("config.loss"));
  tc.loss = static_cast<LossKind>(loss);
  tc.checkpoint_every = idx.count("config.checkpoint_every");
  tc.clip_norm = idx.scalar("config.clip_norm");

  try {
    ck.model.emplace(mc, tc.seed);
  } catch (const DomainError& err) {
    throw LoadError(std::string("stored model configuration is invalid: ") + err.what(),
                    idx.offset_of("config.code_len"));
  }
  const ParameterList& params = ck.model->parameters();
  ck.state.adam = AdamState::zeros(params);
  for (std::size_t p = 0; p < params.size(); ++p) {
    const auto& [name, t] = params[p];
    const ArrayEntry& a = idx.at("param." + name);
    if (a.extents.size() != t.shape().size() ||
        !std::equal(a.extents.begin(), a.extents.end(), t.shape().begin())) {
      throw LoadError("parameter '" + name + "' has the wrong shape", idx.offset_of("param." + name));
    }
    std::copy(a.data.begin(), a.data.end(), const_cast<ad::Tensor&>(t).values().begin());
    const ArrayEntry& m = idx.at("adam.m." + name);
    const ArrayEntry& v = idx.at("adam.v." + name);
    if (m.data.size() != t.size() || v.data.size() != t.size()) {
      throw LoadError("optimizer moments of '" + name + "' have the wrong size",
                      idx.offset_of("adam.m." + name));
    }
    ck.state.adam.m[p] = m.data;
    ck.state.adam.v[p] = v.data;
  }
  ck.state.adam.step = idx.u64("state.step");
  ck.state.epochs_done = static_cast<std::size_t>(idx.u64("state.epoch"));
  return ck;
}

}  // namespace foldgraph
