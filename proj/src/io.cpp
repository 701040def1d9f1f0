// Copyright 2026 The oodbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "oodbench/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <system_error>

#include <fmt/format.h>
#include <json.hpp>

namespace oodbench::io {

using nlohmann::json;

namespace {

constexpr char kPackMagic[4] = {'O', 'O', 'D', 'P'};
constexpr char kHeadMagic[4] = {'O', 'O', 'D', 'H'};
constexpr char kStateMagic[4] = {'O', 'O', 'D', 'S'};
constexpr char kScoresMagic[4] = {'O', 'O', 'D', 'V'};

// --- little-endian primitives -------------------------------------------------

template <class U>
void put_le(std::vector<std::uint8_t>& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <class U>
U get_le(const std::uint8_t* p) {
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(p[i]) << (8 * i);
  return value;
}

void put_f32(std::vector<std::uint8_t>& out, double v) {
  put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}
void put_f64(std::vector<std::uint8_t>& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }
double get_f32(const std::uint8_t* p) { return static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(p))); }
double get_f64(const std::uint8_t* p) { return std::bit_cast<double>(get_le<std::uint64_t>(p)); }

// --- container framing ---------------------------------------------------------

std::vector<std::uint8_t> begin_container(const char (&magic)[4], const json& header) {
  const std::string text = header.dump();
  std::vector<std::uint8_t> out;
  out.insert(out.end(), magic, magic + 4);
  put_le<std::uint32_t>(out, kFormatVersion);
  put_le<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  return out;
}

struct Framed {
  json header;
  std::uint64_t payload_offset;
  std::span<const std::uint8_t> payload;
};

Framed open_container(std::span<const std::uint8_t> bytes, const char (&magic)[4], std::string_view what) {
  using K = FormatError::Kind;
  if (bytes.size() < kPrefixBytes) {
    throw FormatError(K::Truncated, bytes.size(),
                      fmt::format("{}: file is {} bytes, shorter than the {}-byte prefix", what, bytes.size(),
                                  kPrefixBytes));
  }
  if (std::memcmp(bytes.data(), magic, 4) != 0) {
    throw FormatError(K::BadMagic, 0, fmt::format("{}: bad magic, expected \"{}\"", what, std::string_view(magic, 4)));
  }
  const auto version = get_le<std::uint32_t>(bytes.data() + 4);
  if (version != kFormatVersion) {
    throw FormatError(K::UnsupportedVersion, 4,
                      fmt::format("{}: unsupported format version {} (supported: {})", what, version, kFormatVersion));
  }
  const auto header_len = get_le<std::uint64_t>(bytes.data() + 8);
  if (header_len > bytes.size() - kPrefixBytes) {
    throw FormatError(K::LengthMismatch, 8,
                      fmt::format("{}: header length {} exceeds the {} bytes after the prefix", what, header_len,
                                  bytes.size() - kPrefixBytes));
  }
  Framed framed;
  const auto* text = reinterpret_cast<const char*>(bytes.data() + kPrefixBytes);
  framed.header = json::parse(text, text + header_len, nullptr, false);
  if (framed.header.is_discarded() || !framed.header.is_object()) {
    throw FormatError(K::BadHeader, kPrefixBytes, fmt::format("{}: header is not a JSON object", what));
  }
  framed.payload_offset = kPrefixBytes + header_len;
  framed.payload = bytes.subspan(framed.payload_offset);
  return framed;
}

/// Checks the payload size against the length equation. A shortfall of whole
/// rows means the header disagrees with the stored tensors; any other
/// shortfall is a truncated file.
void check_payload(const Framed& f, std::uint64_t expected, std::uint64_t row_bytes, std::string_view what) {
  using K = FormatError::Kind;
  const std::uint64_t actual = f.payload.size();
  if (actual == expected) return;
  const std::uint64_t end = f.payload_offset + actual;
  if (actual > expected) {
    throw FormatError(K::LengthMismatch, f.payload_offset + expected,
                      fmt::format("{}: {} trailing bytes after the tensors declared by the header", what,
                                  actual - expected));
  }
  const std::uint64_t missing = expected - actual;
  if (row_bytes > 0 && missing % row_bytes == 0) {
    throw FormatError(K::LengthMismatch, end,
                      fmt::format("{}: header declares {} more rows than the file holds", what, missing / row_bytes));
  }
  throw FormatError(K::Truncated, end,
                    fmt::format("{}: truncated at byte {}, expected {} bytes", what, end, f.payload_offset + expected));
}

template <class T>
T header_field(const json& header, const char* key, std::string_view what) {
  auto it = header.find(key);
  if (it == header.end()) {
    throw FormatError(FormatError::Kind::BadHeader, kPrefixBytes, fmt::format("{}: header lacks \"{}\"", what, key));
  }
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw FormatError(FormatError::Kind::BadHeader, kPrefixBytes,
                      fmt::format("{}: header field \"{}\" has the wrong type", what, key));
  }
}

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b, std::string_view what) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) {
    throw FormatError(FormatError::Kind::BadHeader, kPrefixBytes, fmt::format("{}: tensor size overflows", what));
  }
  return a * b;
}

void write_matrix_f32(std::vector<std::uint8_t>& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) put_f32(out, m.data()[i]);
}

Matrix read_matrix_f32(const std::uint8_t*& p, std::uint64_t rows, std::uint64_t cols) {
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i, p += 4) m.data()[i] = get_f32(p);
  return m;
}

// --- fitted-state tensors ------------------------------------------------------

struct NamedTensor {
  std::string name;
  Matrix value;
};

Matrix column(const Vector& v) {
  Matrix m(v.size(), 1);
  for (Eigen::Index i = 0; i < v.size(); ++i) m(i, 0) = v[i];
  return m;
}

Vector as_vector(const Matrix& m) {
  Vector v(m.size());
  for (Eigen::Index i = 0; i < m.size(); ++i) v[i] = m.data()[i];
  return v;
}

Matrix mask_matrix(const std::vector<std::uint8_t>& mask, std::size_t k, std::size_t d) {
  Matrix m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < mask.size(); ++i) m.data()[i] = mask[i] ? 1.0 : 0.0;
  return m;
}

std::filesystem::path temp_sibling(const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".tmp";
  return tmp;
}

}  // namespace

FormatError::FormatError(Kind kind, std::uint64_t offset, const std::string& message)
    : std::runtime_error(message), kind_(kind), offset_(offset) {}

std::string_view to_string(FormatError::Kind kind) {
  switch (kind) {
    case FormatError::Kind::BadMagic: return "bad_magic";
    case FormatError::Kind::UnsupportedVersion: return "unsupported_version";
    case FormatError::Kind::Truncated: return "truncated";
    case FormatError::Kind::LengthMismatch: return "length_mismatch";
    case FormatError::Kind::BadHeader: return "bad_header";
    case FormatError::Kind::Io: return "io";
  }
  return "unknown";
}

// --- packs -------------------------------------------------------------------------

std::vector<std::uint8_t> encode_pack(const FeaturePack& pack) {
  const json header = {
      {"dataset_id", pack.dataset_id},
      {"kind", std::string(to_string(pack.kind))},
      {"n", pack.rows()},
      {"d", pack.feature_dim()},
      {"k", pack.num_classes()},
      {"dtype", "f32"},
      {"label_dtype", "i32"},
      {"model_id", pack.model_id},
      {"created_utc", pack.created_utc},
  };
  auto out = begin_container(kPackMagic, header);
  out.reserve(out.size() + 4 * (pack.features.size() + pack.logits.size() + pack.labels.size()));
  write_matrix_f32(out, pack.features);
  write_matrix_f32(out, pack.logits);
  for (auto y : pack.labels) put_le(out, static_cast<std::uint32_t>(y));
  return out;
}

FeaturePack decode_pack(std::span<const std::uint8_t> bytes) {
  constexpr std::string_view what = "feature pack";
  const auto f = open_container(bytes, kPackMagic, what);
  const auto n = header_field<std::uint64_t>(f.header, "n", what);
  const auto d = header_field<std::uint64_t>(f.header, "d", what);
  const auto k = header_field<std::uint64_t>(f.header, "k", what);
  if (header_field<std::string>(f.header, "dtype", what) != "f32" ||
      header_field<std::string>(f.header, "label_dtype", what) != "i32") {
    throw FormatError(FormatError::Kind::BadHeader, kPrefixBytes, "feature pack: only f32 tensors and i32 labels are supported");
  }
  const auto kind_name = header_field<std::string>(f.header, "kind", what);
  const auto kind = parse_dataset_kind(kind_name);
  if (!kind) {
    throw FormatError(FormatError::Kind::BadHeader, kPrefixBytes, fmt::format("feature pack: unknown kind \"{}\"", kind_name));
  }
  if (d > (1ULL << 32) || k > (1ULL << 32)) {
    throw FormatError(FormatError::Kind::BadHeader, kPrefixBytes, "feature pack: implausible tensor dimensions");
  }
  const std::uint64_t row_bytes = 4 * (d + k + 1);
  check_payload(f, checked_mul(n, row_bytes, what), row_bytes, what);

  FeaturePack pack;
  pack.dataset_id = header_field<std::string>(f.header, "dataset_id", what);
  pack.kind = *kind;
  pack.model_id = f.header.value("model_id", "");
  pack.created_utc = f.header.value("created_utc", "");
  const std::uint8_t* p = f.payload.data();
  pack.features = read_matrix_f32(p, n, d);
  pack.logits = read_matrix_f32(p, n, k);
  pack.labels.resize(n);
  for (std::uint64_t i = 0; i < n; ++i, p += 4) pack.labels[i] = static_cast<std::int32_t>(get_le<std::uint32_t>(p));
  return pack;
}

FeaturePack read_pack(const std::filesystem::path& path) { return decode_pack(read_file(path)); }

void write_pack(const FeaturePack& pack, const std::filesystem::path& path) {
  write_file_atomic(path, encode_pack(pack));
}

// --- heads -------------------------------------------------------------------------

std::vector<std::uint8_t> encode_head(const ClassifierHead& head) {
  const json header = {
      {"k", head.num_classes()},         {"d", head.feature_dim()},     {"dtype", "f32"},
      {"model_id", head.model_id},       {"created_utc", head.created_utc},
  };
  auto out = begin_container(kHeadMagic, header);
  write_matrix_f32(out, head.weight);
  for (Eigen::Index i = 0; i < head.bias.size(); ++i) put_f32(out, head.bias[i]);
  return out;
}

ClassifierHead decode_head(std::span<const std::uint8_t> bytes) {
  constexpr std::string_view what = "classifier head";
  const auto f = open_container(bytes, kHeadMagic, what);
  const auto k = header_field<std::uint64_t>(f.header, "k", what);
  const auto d = header_field<std::uint64_t>(f.header, "d", what);
  if (header_field<std::string>(f.header, "dtype", what) != "f32") {
    throw FormatError(FormatError::Kind::BadHeader, kPrefixBytes, "classifier head: only f32 tensors are supported");
  }
  if (d > (1ULL << 32) || k > (1ULL << 32)) {
    throw FormatError(FormatError::Kind::BadHeader, kPrefixBytes, "classifier head: implausible tensor dimensions");
  }
  const std::uint64_t row_bytes = 4 * (d + 1);
  check_payload(f, checked_mul(k, row_bytes, what), row_bytes, what);

  ClassifierHead head;
  head.model_id = f.header.value("model_id", "");
  head.created_utc = f.header.value("created_utc", "");
  const std::uint8_t* p = f.payload.data();
  head.weight = read_matrix_f32(p, k, d);
  head.bias.resize(static_cast<Eigen::Index>(k));
  for (std::uint64_t i = 0; i < k; ++i, p += 4) head.bias[static_cast<Eigen::Index>(i)] = get_f32(p);
  return head;
}

ClassifierHead read_head(const std::filesystem::path& path) { return decode_head(read_file(path)); }

void write_head(const ClassifierHead& head, const std::filesystem::path& path) {
  write_file_atomic(path, encode_head(head));
}

// --- fitted states -------------------------------------------------------------------

std::string state_file_name(Method method) { return fmt::format("{}.state", to_string(method)); }

std::vector<std::uint8_t> encode_state(const FittedScorer& scorer) {
  json params = json::object();
  std::vector<NamedTensor> tensors;
  const auto k = scorer.num_classes;
  const auto d = scorer.feature_dim;
  auto add_head = [&](const ClassifierHead& head) {
    tensors.push_back({"head_weight", head.weight});
    tensors.push_back({"head_bias", column(head.bias)});
  };

  switch (scorer.method) {
    case Method::Msp:
    case Method::GradNorm:
      break;
    case Method::Energy:
      params["temperature"] = std::get<EnergyState>(scorer.state).temperature;
      break;
    case Method::React: {
      const auto& s = std::get<ReactState>(scorer.state);
      params["clip"] = s.clip;
      params["temperature"] = s.temperature;
      add_head(s.head);
      break;
    }
    case Method::Mahalanobis: {
      const auto& s = std::get<MahalanobisState>(scorer.state);
      params["shrinkage"] = s.model.shrinkage;
      tensors.push_back({"class_means", s.model.class_means});
      tensors.push_back({"precision", s.model.precision});
      break;
    }
    case Method::KlMatching:
      tensors.push_back({"templates", std::get<KlMatchingState>(scorer.state).templates});
      break;
    case Method::Knn: {
      const auto& s = std::get<KnnState>(scorer.state);
      params["k"] = s.k;
      tensors.push_back({"points", s.index.points()});
      break;
    }
    case Method::Vim: {
      const auto& s = std::get<VimState>(scorer.state);
      params["alpha"] = s.alpha;
      tensors.push_back({"origin", column(s.subspace.origin)});
      tensors.push_back({"basis", s.subspace.basis});
      break;
    }
    case Method::Dice: {
      const auto& s = std::get<DiceState>(scorer.state);
      tensors.push_back({"keep_mask", mask_matrix(s.keep_mask, k, d)});
      add_head(s.head);
      break;
    }
  }

  json layout = json::array();
  for (const auto& t : tensors) layout.push_back({{"name", t.name}, {"rows", t.value.rows()}, {"cols", t.value.cols()}});
  const json header = {
      {"method", std::string(to_string(scorer.method))},
      {"d", d},
      {"k", k},
      {"dtype", "f64"},
      {"params", params},
      {"tensors", layout},
  };
  auto out = begin_container(kStateMagic, header);
  for (const auto& t : tensors) {
    for (Eigen::Index i = 0; i < t.value.size(); ++i) put_f64(out, t.value.data()[i]);
  }
  return out;
}

FittedScorer decode_state(std::span<const std::uint8_t> bytes) {
  constexpr std::string_view what = "fitted state";
  using K = FormatError::Kind;
  const auto f = open_container(bytes, kStateMagic, what);
  const auto method_name = header_field<std::string>(f.header, "method", what);
  const auto method = parse_method(method_name);
  if (!method) throw FormatError(K::BadHeader, kPrefixBytes, fmt::format("fitted state: unknown method \"{}\"", method_name));
  const auto params = header_field<json>(f.header, "params", what);
  const auto layout = header_field<json>(f.header, "tensors", what);
  if (!layout.is_array() || !params.is_object()) throw FormatError(K::BadHeader, kPrefixBytes, "fitted state: malformed header");

  std::uint64_t expected = 0;
  std::vector<std::pair<std::string, std::pair<std::uint64_t, std::uint64_t>>> shapes;
  for (const auto& entry : layout) {
    const auto rows = header_field<std::uint64_t>(entry, "rows", what);
    const auto cols = header_field<std::uint64_t>(entry, "cols", what);
    if (rows > (1ULL << 32) || cols > (1ULL << 32)) throw FormatError(K::BadHeader, kPrefixBytes, "fitted state: implausible tensor");
    shapes.push_back({header_field<std::string>(entry, "name", what), {rows, cols}});
    expected += checked_mul(checked_mul(rows, cols, what), 8, what);
  }
  check_payload(f, expected, 0, what);

  std::map<std::string, Matrix> tensors;
  const std::uint8_t* p = f.payload.data();
  for (const auto& [name, shape] : shapes) {
    Matrix m(static_cast<Eigen::Index>(shape.first), static_cast<Eigen::Index>(shape.second));
    for (Eigen::Index i = 0; i < m.size(); ++i, p += 8) m.data()[i] = get_f64(p);
    tensors.emplace(name, std::move(m));
  }
  auto tensor = [&](const char* name) -> const Matrix& {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError(K::BadHeader, kPrefixBytes, fmt::format("fitted state: missing tensor \"{}\"", name));
    return it->second;
  };
  auto param = [&](const char* name) { return header_field<double>(params, name, what); };
  auto head = [&] {
    ClassifierHead h;
    h.weight = tensor("head_weight");
    h.bias = as_vector(tensor("head_bias"));
    return h;
  };

  FittedScorer out;
  out.method = *method;
  out.feature_dim = header_field<std::size_t>(f.header, "d", what);
  out.num_classes = header_field<std::size_t>(f.header, "k", what);
  switch (*method) {
    case Method::Msp: out.state = MspState{}; break;
    case Method::GradNorm: out.state = GradNormState{}; break;
    case Method::Energy: out.state = EnergyState{param("temperature")}; break;
    case Method::React: out.state = ReactState{param("clip"), param("temperature"), head()}; break;
    case Method::Mahalanobis: {
      PrecisionModel model;
      model.class_means = tensor("class_means");
      model.precision = tensor("precision");
      model.shrinkage = param("shrinkage");
      out.state = MahalanobisState{std::move(model)};
      break;
    }
    case Method::KlMatching: out.state = KlMatchingState{tensor("templates")}; break;
    case Method::Knn: {
      try {
        out.state = KnnState{NnIndex::from_normalized(tensor("points")), header_field<std::size_t>(params, "k", what)};
      } catch (const std::invalid_argument& e) {
        throw FormatError(K::BadHeader, f.payload_offset, fmt::format("fitted state: {}", e.what()));
      }
      break;
    }
    case Method::Vim: {
      VimState s;
      s.subspace.origin = as_vector(tensor("origin"));
      s.subspace.basis = tensor("basis");
      s.alpha = param("alpha");
      out.state = std::move(s);
      break;
    }
    case Method::Dice: {
      const auto& m = tensor("keep_mask");
      std::vector<std::uint8_t> mask(static_cast<std::size_t>(m.size()));
      for (Eigen::Index i = 0; i < m.size(); ++i) mask[static_cast<std::size_t>(i)] = m.data()[i] != 0.0 ? 1 : 0;
      out.state = DiceState{std::move(mask), head()};
      break;
    }
  }
  return out;
}

FittedScorer read_state(const std::filesystem::path& path) { return decode_state(read_file(path)); }

void write_state(const FittedScorer& scorer, const std::filesystem::path& path) {
  write_file_atomic(path, encode_state(scorer));
}

// --- score vectors -------------------------------------------------------------------

std::vector<std::uint8_t> encode_scores(const ScoreVector& scores) {
  const json header = {
      {"method", std::string(to_string(scores.method))},
      {"dataset_id", scores.dataset_id},
      {"n", scores.scores.size()},
      {"dtype", "f64"},
  };
  auto out = begin_container(kScoresMagic, header);
  for (double s : scores.scores) put_f64(out, s);
  return out;
}

ScoreVector decode_scores(std::span<const std::uint8_t> bytes) {
  constexpr std::string_view what = "score vector";
  const auto f = open_container(bytes, kScoresMagic, what);
  const auto n = header_field<std::uint64_t>(f.header, "n", what);
  const auto method_name = header_field<std::string>(f.header, "method", what);
  const auto method = parse_method(method_name);
  if (!method) {
    throw FormatError(FormatError::Kind::BadHeader, kPrefixBytes, fmt::format("score vector: unknown method \"{}\"", method_name));
  }
  check_payload(f, checked_mul(n, 8, what), 8, what);
  ScoreVector out;
  out.method = *method;
  out.dataset_id = header_field<std::string>(f.header, "dataset_id", what);
  out.scores.resize(n);
  const std::uint8_t* p = f.payload.data();
  for (std::uint64_t i = 0; i < n; ++i, p += 8) out.scores[i] = get_f64(p);
  return out;
}

ScoreVector read_scores(const std::filesystem::path& path) { return decode_scores(read_file(path)); }

void write_scores(const ScoreVector& scores, const std::filesystem::path& path) {
  write_file_atomic(path, encode_scores(scores));
}

// --- files ------------------------------------------------------------------------------

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::Io, 0, fmt::format("cannot open {}", path.string()));
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  const auto tmp = temp_sibling(path);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(FormatError::Kind::Io, 0, fmt::format("cannot write {}", tmp.string()));
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError(FormatError::Kind::Io, 0, fmt::format("write failed for {}", tmp.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw FormatError(FormatError::Kind::Io, 0, fmt::format("cannot rename {} to {}: {}", tmp.string(), path.string(), ec.message()));
}

void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace oodbench::io
