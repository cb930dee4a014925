// Checkpoint layout (all integers little-endian):
//   "RSPRL" | u32 format_version | u64 header_bytes | JSON header |
//   f64 parameter blocks (row-major, declaration order) | u32 CRC-32 of all preceding bytes

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "radsprl/error.hpp"
#include "radsprl/tagger.hpp"

namespace radsprl {

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

namespace {

constexpr char kMagic[5] = {'R', 'S', 'P', 'R', 'L'};

template <class T>
void put(std::string& buf, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  buf.append(bytes, sizeof(T));
}

template <class T>
T get(const std::string& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size()) {
    throw CheckpointError(CheckpointError::Kind::Format, "checkpoint truncated");
  }
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

std::uint32_t crc32_of(const char* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

void save_model(const TaggerModel& model, const std::filesystem::path& path) {
  nlohmann::json header;
  header["config"] = model.config().to_json();
  header["vocab"] = {{"words", model.vocabs().words.to_json()},
                     {"chars", model.vocabs().chars.to_json()}};
  nlohmann::json shapes = nlohmann::json::array();
  for (const nn::Param* p : model.params()) {
    shapes.push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
  }
  header["params"] = shapes;
  header["trainable"] = {{"word_embeddings", model.word_emb.trainable}};
  const std::string header_text = header.dump();

  std::string buf(kMagic, sizeof(kMagic));
  put<std::uint32_t>(buf, kCheckpointVersion);
  put<std::uint64_t>(buf, header_text.size());
  buf += header_text;
  for (const nn::Param* p : model.params()) {
    for (Eigen::Index r = 0; r < p->value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) put<double>(buf, p->value(r, c));
    }
  }
  put<std::uint32_t>(buf, crc32_of(buf.data(), buf.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(CheckpointError::Kind::Io, "cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw CheckpointError(CheckpointError::Kind::Io, "write failed for " + path.string());
}

TaggerModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::Io, "cannot open " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (buf.size() < sizeof(kMagic) || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(CheckpointError::Kind::Format, "not a checkpoint (bad magic)");
  }
  std::size_t pos = sizeof(kMagic);
  const auto version = get<std::uint32_t>(buf, pos);
  if (version != kCheckpointVersion) {
    throw CheckpointError(CheckpointError::Kind::Version,
                          "unsupported checkpoint format_version " + std::to_string(version) +
                              " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  if (buf.size() < pos + sizeof(std::uint32_t)) {
    throw CheckpointError(CheckpointError::Kind::Checksum, "checksum failure: file truncated");
  }
  const std::size_t body = buf.size() - sizeof(std::uint32_t);
  std::size_t crc_pos = body;
  if (get<std::uint32_t>(buf, crc_pos) != crc32_of(buf.data(), body)) {
    throw CheckpointError(CheckpointError::Kind::Checksum, "checksum failure: " + path.string());
  }

  const auto header_len = get<std::uint64_t>(buf, pos);
  if (pos + header_len > body) throw CheckpointError(CheckpointError::Kind::Format, "bad header length");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(buf.substr(pos, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::Format, std::string("bad header: ") + e.what());
  }
  pos += header_len;

  TaggerConfig config;
  config.merge_json(header.at("config"));
  Vocabularies vocabs{Vocabulary::from_json(header.at("vocab").at("words")),
                      Vocabulary::from_json(header.at("vocab").at("chars"))};
  TaggerModel model = TaggerModel::create(config, std::move(vocabs));
  model.word_emb.trainable = header.value("trainable", nlohmann::json::object())
                                 .value("word_embeddings", true);
  const auto params = model.params();
  const auto& shapes = header.at("params");
  if (shapes.size() != params.size()) {
    throw CheckpointError(CheckpointError::Kind::Format, "parameter count mismatch");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    nn::Param& p = *params[k];
    if (shapes[k].at("name") != p.name || shapes[k].at("rows") != p.value.rows() ||
        shapes[k].at("cols") != p.value.cols()) {
      throw CheckpointError(CheckpointError::Kind::Format, "parameter shape mismatch for " + p.name);
    }
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) p.value(r, c) = get<double>(buf, pos);
    }
  }
  if (pos != body) throw CheckpointError(CheckpointError::Kind::Format, "trailing bytes in checkpoint");
  model.rebuild_mask();
  return model;
}

}  // namespace radsprl
