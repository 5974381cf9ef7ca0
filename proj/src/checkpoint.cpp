#include "sands/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>

#include "sands/common.hpp"

namespace sands {
namespace {

constexpr char kMagic[8] = {'S', 'A', 'N', 'D', 'S', 'C', 'K', '\0'};
constexpr uint64_t kMaxLength = uint64_t{1} << 34;

// Little-endian on every platform we build on; the header records the
// magic so a foreign byte order is rejected rather than misread.
template <typename T>
void put(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw DataError("checkpoint truncated");
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put<uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto n = get<uint64_t>(in);
  if (n > kMaxLength) throw DataError("checkpoint corrupt: oversized string");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw DataError("checkpoint truncated");
  return s;
}

void put_ints(std::ostream& out, const std::vector<int>& v) {
  put<uint64_t>(out, v.size());
  for (int x : v) put<int32_t>(out, x);
}

std::vector<int> get_ints(std::istream& in) {
  const auto n = get<uint64_t>(in);
  if (n > kMaxLength) throw DataError("checkpoint corrupt: oversized list");
  std::vector<int> v(n);
  for (auto& x : v) x = get<int32_t>(in);
  return v;
}

void put_matrix(std::ostream& out, const std::string& name, const Matrix& m) {
  put_string(out, name);
  put<int64_t>(out, m.rows());
  put<int64_t>(out, m.cols());
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(m.size())));
}

void get_matrix(std::istream& in, const std::string& expected_name, Matrix& m) {
  const std::string name = get_string(in);
  if (name != expected_name)
    throw DataError("checkpoint tensor '" + name + "' where '" + expected_name + "' was expected");
  const auto rows = get<int64_t>(in);
  const auto cols = get<int64_t>(in);
  if (rows != m.rows() || cols != m.cols())
    throw DataError("checkpoint tensor '" + name + "' has shape " + std::to_string(rows) + "x" +
                    std::to_string(cols) + ", expected " + std::to_string(m.rows()) + "x" +
                    std::to_string(m.cols()));
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(m.size())));
  if (!in) throw DataError("checkpoint truncated");
}

void put_dims(std::ostream& out, const ModelDims& d) {
  for (int v : {d.word_table, d.hashtag_table, d.word_dim, d.hashtag_dim, d.attention_dim,
                d.lstm_hidden, d.label_count})
    put<int32_t>(out, v);
  put_ints(out, d.conv_windows);
  put_ints(out, d.conv_filters);
  put<uint8_t>(out, d.scale_attention ? 1 : 0);
}

ModelDims get_dims(std::istream& in) {
  ModelDims d;
  for (int* v : {&d.word_table, &d.hashtag_table, &d.word_dim, &d.hashtag_dim, &d.attention_dim,
                 &d.lstm_hidden, &d.label_count})
    *v = get<int32_t>(in);
  d.conv_windows = get_ints(in);
  d.conv_filters = get_ints(in);
  d.scale_attention = get<uint8_t>(in) != 0;
  return d;
}

void put_tensors(std::ostream& out, const ClassifierParams& p) {
  p.visit([&](const std::string& name, const Matrix& m) { put_matrix(out, name, m); });
}

void get_tensors(std::istream& in, ClassifierParams& p) {
  p.visit([&](const std::string& name, Matrix& m) { get_matrix(in, name, m); });
}

void put_cache(std::ostream& out, const PredictionCache& c) {
  put<uint64_t>(out, c.users());
  put<int32_t>(out, c.label_count());
  for (size_t u = 0; u < c.users(); ++u) {
    const int user = static_cast<int>(u);
    put<uint8_t>(out, c.present(user) ? 1 : 0);
    if (!c.present(user)) continue;
    const RowVector row = c.row(user);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(row.size())));
  }
}

PredictionCache get_cache(std::istream& in) {
  const auto users = get<uint64_t>(in);
  const auto labels = get<int32_t>(in);
  if (users > kMaxLength || labels < 0) throw DataError("checkpoint corrupt: cache shape");
  PredictionCache c(users, labels);
  RowVector row(labels);
  for (size_t u = 0; u < users; ++u) {
    if (get<uint8_t>(in) == 0) continue;
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(labels)));
    if (!in) throw DataError("checkpoint truncated");
    c.set(static_cast<int>(u), row);
  }
  return c;
}

void put_counters(std::ostream& out, const ForwardCounters& c) {
  for (int64_t v : {c.cache_updates, c.cache_inits, c.loss_passes, c.vote_passes})
    put<int64_t>(out, v);
}

ForwardCounters get_counters(std::istream& in) {
  ForwardCounters c;
  for (int64_t* v : {&c.cache_updates, &c.cache_inits, &c.loss_passes, &c.vote_passes})
    *v = get<int64_t>(in);
  return c;
}

void put_pool(std::ostream& out, const std::vector<std::pair<size_t, int>>& pool) {
  put<uint64_t>(out, pool.size());
  for (const auto& [tweet, label] : pool) {
    put<uint64_t>(out, tweet);
    put<int32_t>(out, label);
  }
}

std::vector<std::pair<size_t, int>> get_pool(std::istream& in) {
  const auto n = get<uint64_t>(in);
  if (n > kMaxLength) throw DataError("checkpoint corrupt: oversized pool");
  std::vector<std::pair<size_t, int>> pool;
  for (uint64_t i = 0; i < n; ++i) {
    const auto tweet = get<uint64_t>(in);
    pool.emplace_back(tweet, get<int32_t>(in));
  }
  return pool;
}

void put_adam(std::ostream& out, const Adam& opt) {
  const auto& c = opt.config();
  for (double v : {c.learning_rate, c.beta1, c.beta2, c.epsilon}) put<double>(out, v);
  put<int64_t>(out, opt.steps());
  put_tensors(out, opt.first_moment());
  put_tensors(out, opt.second_moment());
}

Adam get_adam(std::istream& in, const ClassifierParams& params) {
  AdamConfig c;
  for (double* v : {&c.learning_rate, &c.beta1, &c.beta2, &c.epsilon}) *v = get<double>(in);
  Adam opt(params, c);
  opt.set_steps(get<int64_t>(in));
  get_tensors(in, opt.first_moment());
  get_tensors(in, opt.second_moment());
  return opt;
}

}  // namespace

void write_params(std::ostream& out, const ClassifierParams& params) {
  put<uint8_t>(out, params.body == BodyKind::kBlstm ? 1 : 0);
  put_dims(out, params.dims);
  put_tensors(out, params);
}

ClassifierParams read_params(std::istream& in) {
  const auto body = get<uint8_t>(in) == 1 ? BodyKind::kBlstm : BodyKind::kConv;
  ModelDims dims = get_dims(in);
  // Shapes come from init_params so the reader and the model cannot drift.
  ClassifierParams p = init_params(body, dims, 0);
  get_tensors(in, p);
  return p;
}

void write_checkpoint(std::ostream& out, const Checkpoint& c) {
  out.write(kMagic, sizeof kMagic);
  put<uint32_t>(out, kCheckpointVersion);
  put_string(out, c.config_text);
  put_string(out, c.config_hash);
  put<uint64_t>(out, c.seed);
  put<uint64_t>(out, c.split_size);
  put<double>(out, c.unlabeled_fraction);

  const TrainState& s = c.state;
  write_params(out, s.first);
  write_params(out, s.second);
  put_adam(out, s.first_opt);
  put_adam(out, s.second_opt);
  put_cache(out, s.first_cache);
  put_cache(out, s.second_cache);
  put_counters(out, s.first_counters);
  put_counters(out, s.second_counters);
  put_pool(out, s.first_pseudo);
  put_pool(out, s.second_pseudo);
  put<int32_t>(out, s.epoch);
  put<uint64_t>(out, s.history.size());
  for (const auto& m : s.history) {
    put<int32_t>(out, m.epoch);
    for (double v : {m.macro_f1_first, m.macro_f1_second, m.loss_supervised, m.loss_semi,
                     m.wall_seconds})
      put<double>(out, v);
  }
  if (!out) throw DataError("failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw DataError("not a checkpoint file");
  const auto version = get<uint32_t>(in);
  if (version != kCheckpointVersion)
    throw DataError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  Checkpoint c;
  c.config_text = get_string(in);
  c.config_hash = get_string(in);
  c.seed = get<uint64_t>(in);
  c.split_size = get<uint64_t>(in);
  c.unlabeled_fraction = get<double>(in);

  TrainState& s = c.state;
  s.first = read_params(in);
  s.second = read_params(in);
  s.first_opt = get_adam(in, s.first);
  s.second_opt = get_adam(in, s.second);
  s.first_cache = get_cache(in);
  s.second_cache = get_cache(in);
  s.first_counters = get_counters(in);
  s.second_counters = get_counters(in);
  s.first_pseudo = get_pool(in);
  s.second_pseudo = get_pool(in);
  s.epoch = get<int32_t>(in);
  const auto n = get<uint64_t>(in);
  if (n > kMaxLength) throw DataError("checkpoint corrupt: oversized history");
  for (uint64_t i = 0; i < n; ++i) {
    EpochMetrics m;
    m.epoch = get<int32_t>(in);
    for (double* v : {&m.macro_f1_first, &m.macro_f1_second, &m.loss_supervised, &m.loss_semi,
                      &m.wall_seconds})
      *v = get<double>(in);
    s.history.push_back(m);
  }
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint '" + path + "'");
    write_checkpoint(out, checkpoint);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in);
}

}  // namespace sands
