#include "flock/io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <zlib.h>

#include "flock/errors.hpp"

namespace flock {

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

namespace {

constexpr std::array<char, 4> kDatasetMagic{'F', 'L', 'K', '1'};
constexpr std::array<char, 4> kCheckpointMagic{'F', 'L', 'K', 'M'};

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (crc_enabled_)
      crc_ = crc32(crc_, static_cast<const Bytef*>(data), static_cast<uInt>(n));
  }
  template <typename T>
  void put(T value) {
    bytes(&value, sizeof(T));
  }
  void u64(std::size_t v) { put<std::uint64_t>(v); }

  // Row-major over (row, col).
  void matrix(const Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) put<double>(m(r, c));
  }

  void start_crc() {
    crc_enabled_ = true;
    crc_ = crc32(0L, Z_NULL, 0);
  }
  std::uint32_t crc() const { return static_cast<std::uint32_t>(crc_); }

 private:
  std::ostream& out_;
  bool crc_enabled_ = false;
  uLong crc_ = 0;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void bytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      throw FormatError("unexpected end of file");
    if (crc_enabled_)
      crc_ = crc32(crc_, static_cast<const Bytef*>(data), static_cast<uInt>(n));
  }
  template <typename T>
  T get() {
    T value;
    bytes(&value, sizeof(T));
    return value;
  }
  std::size_t u64(std::size_t limit, const char* what) {
    const auto v = get<std::uint64_t>();
    if (v > limit) throw FormatError(std::string("implausible ") + what);
    return static_cast<std::size_t>(v);
  }
  Matrix matrix(Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = get<double>();
    return m;
  }

  void start_crc() {
    crc_enabled_ = true;
    crc_ = crc32(0L, Z_NULL, 0);
  }
  std::uint32_t crc() const { return static_cast<std::uint32_t>(crc_); }

 private:
  std::istream& in_;
  bool crc_enabled_ = false;
  uLong crc_ = 0;
};

void expect_magic(Reader& r, const std::array<char, 4>& magic, const char* what) {
  std::array<char, 4> got{};
  r.bytes(got.data(), got.size());
  if (got != magic) throw FormatError(std::string("not a ") + what + " file (bad magic)");
}

constexpr std::size_t kMaxAgents = 1u << 20;
constexpr std::size_t kMaxSteps = 1u << 24;
constexpr std::size_t kMaxTrajectories = 1u << 24;
constexpr std::size_t kMaxDim = 1u << 16;

void write_trajectory(Writer& w, const TrajectoryRecord& tr, std::size_t steps,
                      std::size_t agents) {
  if (tr.length() != steps || tr.agents() != agents || tr.velocities.size() != steps ||
      tr.features.size() != steps || tr.actions.size() != steps || tr.graphs.size() != steps)
    throw InvalidArgument("write_dataset: trajectory shape disagrees with header");
  for (const auto& m : tr.positions) w.matrix(m);
  for (const auto& m : tr.velocities) w.matrix(m);
  for (const auto& m : tr.features) w.matrix(m);
  for (const auto& m : tr.actions) w.matrix(m);
  for (const GraphSnapshot& g : tr.graphs) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(g.edge_count()));
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
      if (g.weights()[e] != 1.0)
        throw InvalidArgument("write_dataset: only binary graphs are stored");
      w.put<std::uint32_t>(g.edges()[e].source);
      w.put<std::uint32_t>(g.edges()[e].target);
    }
  }
}

TrajectoryRecord read_trajectory(Reader& r, std::size_t steps, std::size_t agents) {
  const auto n = static_cast<Eigen::Index>(agents);
  TrajectoryRecord tr;
  auto block = [&](std::vector<Matrix>& dst, Eigen::Index cols) {
    dst.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) dst.push_back(r.matrix(n, cols));
  };
  block(tr.positions, 2);
  block(tr.velocities, 2);
  block(tr.features, kFeatureDim);
  block(tr.actions, kActionDim);
  tr.graphs.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const auto count = r.get<std::uint32_t>();
    if (count > agents * (agents - 1)) throw FormatError("implausible edge count");
    std::vector<Edge> edges(count);
    for (Edge& e : edges) {
      e.source = r.get<std::uint32_t>();
      e.target = r.get<std::uint32_t>();
    }
    try {
      tr.graphs.emplace_back(agents, std::move(edges));
    } catch (const InvalidArgument& ex) {
      throw FormatError(std::string("bad edge list: ") + ex.what());
    }
  }
  return tr;
}

}  // namespace

void write_dataset(std::ostream& out, const Dataset& ds) {
  const FlockingConfig& c = ds.config;
  const std::size_t steps = c.steps();
  Writer w(out);
  w.bytes(kDatasetMagic.data(), kDatasetMagic.size());
  w.put<std::uint32_t>(kDatasetVersion);
  w.u64(c.n_agents);
  w.u64(steps);
  w.u64(kFeatureDim);
  w.u64(kActionDim);
  w.put<double>(c.sampling_time);
  w.put<double>(c.comm_radius);
  w.put<std::uint64_t>(c.seed);
  w.u64(ds.train.size());
  w.u64(ds.valid.size());
  w.u64(ds.test.size());
  for (double v : {c.max_accel, c.vel_range, c.bias_range, c.min_init_dist,
                   c.potential_cutoff, c.placement_spacing})
    w.put<double>(v);
  for (const auto* split : {&ds.train, &ds.valid, &ds.test})
    for (const TrajectoryRecord& tr : *split) write_trajectory(w, tr, steps, c.n_agents);
  if (!out) throw FormatError("write failed");
}

Dataset read_dataset(std::istream& in) {
  Reader r(in);
  expect_magic(r, kDatasetMagic, "FLK1 dataset");
  const auto version = r.get<std::uint32_t>();
  if (version != kDatasetVersion)
    throw FormatError("unsupported dataset version " + std::to_string(version));
  Dataset ds;
  FlockingConfig& c = ds.config;
  c.n_agents = r.u64(kMaxAgents, "agent count");
  const std::size_t steps = r.u64(kMaxSteps, "step count");
  if (c.n_agents < 2 || steps == 0) throw FormatError("empty dataset header");
  if (r.get<std::uint64_t>() != static_cast<std::uint64_t>(kFeatureDim))
    throw FormatError("feature dimension mismatch");
  if (r.get<std::uint64_t>() != static_cast<std::uint64_t>(kActionDim))
    throw FormatError("action dimension mismatch");
  c.sampling_time = r.get<double>();
  c.comm_radius = r.get<double>();
  c.seed = r.get<std::uint64_t>();
  c.duration = static_cast<double>(steps) * c.sampling_time;
  const std::size_t n_train = r.u64(kMaxTrajectories, "trajectory count");
  const std::size_t n_valid = r.u64(kMaxTrajectories, "trajectory count");
  const std::size_t n_test = r.u64(kMaxTrajectories, "trajectory count");
  c.max_accel = r.get<double>();
  c.vel_range = r.get<double>();
  c.bias_range = r.get<double>();
  c.min_init_dist = r.get<double>();
  c.potential_cutoff = r.get<double>();
  c.placement_spacing = r.get<double>();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("bad dataset header: ") + e.what());
  }
  if (c.steps() != steps) throw FormatError("step count disagrees with duration");

  auto split = [&](std::vector<TrajectoryRecord>& dst, std::size_t count) {
    dst.reserve(count);
    for (std::size_t i = 0; i < count; ++i) dst.push_back(read_trajectory(r, steps, c.n_agents));
  };
  split(ds.train, n_train);
  split(ds.valid, n_valid);
  split(ds.test, n_test);
  if (in.peek() != std::char_traits<char>::eof())
    throw FormatError("trailing bytes after dataset");
  return ds;
}

void write_checkpoint(std::ostream& out, const ControllerParams& params) {
  params.validate();
  Writer w(out);
  w.start_crc();
  w.bytes(kCheckpointMagic.data(), kCheckpointMagic.size());
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(params.arch));
  w.u64(static_cast<std::size_t>(params.features()));
  w.u64(params.taps());
  w.u64(static_cast<std::size_t>(params.hidden_features()));
  w.put<double>(params.tap_gain);
  const auto tensors = params.tensors();
  w.u64(tensors.size());
  for (const Matrix* m : tensors) {
    w.u64(static_cast<std::size_t>(m->rows()));
    w.u64(static_cast<std::size_t>(m->cols()));
    w.matrix(*m);
  }
  const std::uint32_t crc = w.crc();
  out.write(reinterpret_cast<const char*>(&crc), sizeof crc);
  if (!out) throw FormatError("write failed");
}

ControllerParams read_checkpoint(std::istream& in) {
  Reader r(in);
  r.start_crc();
  expect_magic(r, kCheckpointMagic, "FLKM checkpoint");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto arch_id = r.get<std::uint8_t>();
  if (arch_id > static_cast<std::uint8_t>(Arch::GRNN))
    throw FormatError("unknown architecture id " + std::to_string(arch_id));
  const auto arch = static_cast<Arch>(arch_id);
  const std::size_t g = r.u64(kMaxDim, "feature count");
  const std::size_t k = r.u64(kMaxDim, "tap count");
  const std::size_t h = r.u64(kMaxDim, "hidden feature count");
  const double gain = r.get<double>();
  const std::size_t count = r.u64(3 * kMaxDim + 2, "tensor count");
  if (g == 0 || k == 0) throw FormatError("empty controller");

  ControllerParams p;
  p.arch = arch;
  p.tap_gain = gain;
  const auto gi = static_cast<Eigen::Index>(g);
  p.input = FilterBank::zeros(k, kFeatureDim, gi);
  if (arch == Arch::GRNN) {
    if (h != g) throw FormatError("GRNN hidden size must equal G");
    p.hidden = FilterBank::zeros(k, gi, gi);
    p.output = FilterBank::zeros(k, gi, gi);
  } else if (h != 0) {
    throw FormatError("hidden size given for a feed-forward controller");
  }
  p.readout_weight = Matrix::Zero(gi, kActionDim);
  p.readout_bias = Matrix::Zero(1, kActionDim);
  auto tensors = p.tensors();
  if (count != tensors.size()) throw FormatError("tensor count disagrees with header");
  for (Matrix* m : tensors) {
    const std::size_t rows = r.u64(kMaxDim, "tensor rows");
    const std::size_t cols = r.u64(kMaxDim, "tensor cols");
    if (static_cast<Eigen::Index>(rows) != m->rows() ||
        static_cast<Eigen::Index>(cols) != m->cols())
      throw FormatError("tensor shape disagrees with header");
    *m = r.matrix(m->rows(), m->cols());
  }
  const std::uint32_t expected = r.crc();
  std::uint32_t stored = 0;
  in.read(reinterpret_cast<char*>(&stored), sizeof stored);
  if (in.gcount() != sizeof stored) throw FormatError("missing checksum");
  if (stored != expected) throw FormatError("checkpoint checksum mismatch");
  try {
    p.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("bad checkpoint: ") + e.what());
  }
  return p;
}

namespace {
std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  return out;
}
std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return in;
}
}  // namespace

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  auto out = open_out(path);
  write_dataset(out, dataset);
}

Dataset load_dataset(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_dataset(in);
}

void save_checkpoint(const std::filesystem::path& path, const ControllerParams& params) {
  auto out = open_out(path);
  write_checkpoint(out, params);
}

ControllerParams load_checkpoint(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_checkpoint(in);
}

std::vector<char> read_file_bytes(const std::filesystem::path& path) {
  auto in = open_in(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace flock
