#include "lexdraft/model_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

#include "lexdraft/error.hpp"
#include "lexdraft/kneser_ney.hpp"
#include "lexdraft/neural_lm.hpp"
#include "lexdraft/random.hpp"

namespace lexdraft {
namespace {

constexpr std::string_view kMagic = "LEXLM1\n";
constexpr std::string_view kPayloadLine = "payload\n";

void put_double(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

class PayloadReader {
 public:
  explicit PayloadReader(std::string_view bytes) : bytes_(bytes) {
    if (bytes_.size() % 8 != 0) throw Error(ErrorCode::kBadFormat, "truncated model payload");
  }
  size_t remaining() const { return (bytes_.size() - pos_) / 8; }
  double next() {
    if (pos_ + 8 > bytes_.size()) throw Error(ErrorCode::kBadFormat, "model payload too short");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }
  std::uint64_t next_count() {
    const double v = next();
    if (!(v >= 0.0) || v != static_cast<double>(static_cast<std::uint64_t>(v))) {
      throw Error(ErrorCode::kBadFormat, "model payload holds a non-integral count");
    }
    return static_cast<std::uint64_t>(v);
  }

 private:
  std::string_view bytes_;
  size_t pos_ = 0;
};

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Parsed {
  ModelManifest manifest;
  Vocabulary vocab;
  std::string_view payload;
};

Parsed split_model(std::string_view bytes) {
  if (bytes.substr(0, kMagic.size()) != kMagic) {
    throw Error(ErrorCode::kBadFormat, "not a LEXLM1 model file");
  }
  const size_t payload_at = bytes.find("\npayload\n");
  if (payload_at == std::string_view::npos) {
    throw Error(ErrorCode::kBadFormat, "model file lacks a payload section");
  }
  std::string_view header = bytes.substr(kMagic.size(), payload_at + 1 - kMagic.size());
  Parsed parsed;
  parsed.payload = bytes.substr(payload_at + 1 + kPayloadLine.size());

  const size_t vocab_at = header.find("LEXVOC1\n");
  if (vocab_at == std::string_view::npos) {
    throw Error(ErrorCode::kBadFormat, "model file lacks its vocabulary");
  }
  std::istringstream fields{std::string(header.substr(0, vocab_at))};
  std::string line;
  while (std::getline(fields, line)) {
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::kBadFormat, "bad manifest line '" + line + "'");
    parsed.manifest.fields[line.substr(0, eq)] = line.substr(eq + 1);
  }
  parsed.vocab = parse_vocabulary(header.substr(vocab_at));
  parsed.manifest.vocab_size = parsed.vocab.size();
  const auto& f = parsed.manifest.fields;
  if (f.count("vocab_size") && f.at("vocab_size") != std::to_string(parsed.vocab.size())) {
    throw Error(ErrorCode::kBadFormat, "manifest vocab_size disagrees with the vocabulary");
  }
  if (f.count("vocab_hash") && f.at("vocab_hash") != parsed.vocab.hash_hex()) {
    throw Error(ErrorCode::kBadFormat, "manifest vocab_hash disagrees with the vocabulary");
  }
  return parsed;
}

const std::string& field(const ModelManifest& m, const std::string& key) {
  const auto it = m.fields.find(key);
  if (it == m.fields.end()) throw Error(ErrorCode::kBadFormat, "manifest lacks '" + key + "'");
  return it->second;
}

size_t field_size(const ModelManifest& m, const std::string& key) {
  try {
    return std::stoull(field(m, key));
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::kBadFormat, "manifest field '" + key + "' is not a number");
  }
}

}  // namespace

std::string serialize_model(const LanguageModel& model) {
  std::string manifest;
  std::string payload;
  manifest += "backend=" + std::string(model.kind()) + "\n";
  manifest += "vocab_hash=" + model.vocabulary().hash_hex() + "\n";
  manifest += "vocab_size=" + std::to_string(model.vocabulary().size()) + "\n";

  if (const auto* kn = dynamic_cast<const KneserNeyModel*>(&model)) {
    manifest += "order=" + std::to_string(kn->order()) + "\n";
    manifest += "discount=" + format_real(kn->discount()) + "\n";
    for (const auto& table : kn->counts()) {
      std::vector<std::pair<std::vector<TokenId>, std::uint64_t>> sorted(table.begin(),
                                                                         table.end());
      std::sort(sorted.begin(), sorted.end());
      put_double(payload, static_cast<double>(sorted.size()));
      for (const auto& [gram, c] : sorted) {
        for (TokenId id : gram) put_double(payload, id);
        put_double(payload, static_cast<double>(c));
      }
    }
  } else if (const auto* nn = dynamic_cast<const NeuralLm*>(&model)) {
    manifest += "context_len=" + std::to_string(nn->dims().context_len) + "\n";
    manifest += "embed_dim=" + std::to_string(nn->dims().embed_dim) + "\n";
    manifest += "hidden_dim=" + std::to_string(nn->dims().hidden_dim) + "\n";
    for (const auto group : nn->params().groups()) {
      for (double w : group) put_double(payload, w);
    }
  } else {
    throw Error(ErrorCode::kBadConfig,
                "backend '" + std::string(model.kind()) + "' cannot be saved");
  }
  manifest += "payload_doubles=" + std::to_string(payload.size() / 8) + "\n";

  std::string out(kMagic);
  out += manifest;
  out += serialize_vocabulary(model.vocabulary());
  out += kPayloadLine;
  out += payload;
  return out;
}

void save_model(const LanguageModel& model, const std::filesystem::path& path) {
  write_file(path, serialize_model(model));
}

ModelManifest read_manifest(std::string_view bytes) { return split_model(bytes).manifest; }

std::unique_ptr<LanguageModel> parse_model(std::string_view bytes) {
  Parsed parsed = split_model(bytes);
  const ModelManifest& m = parsed.manifest;
  PayloadReader payload(parsed.payload);
  if (payload.remaining() != field_size(m, "payload_doubles")) {
    throw Error(ErrorCode::kBadFormat, "payload size disagrees with the manifest");
  }
  const std::string& backend = field(m, "backend");
  if (backend == "kneser-ney") {
    const int order = static_cast<int>(field_size(m, "order"));
    const double discount = std::stod(field(m, "discount"));
    if (order < 1 || order > KneserNeyModel::kMaxOrder) {
      throw Error(ErrorCode::kBadFormat, "model order out of range");
    }
    std::vector<NgramCounts> counts(static_cast<size_t>(order));
    for (size_t k = 1; k <= counts.size(); ++k) {
      const std::uint64_t entries = payload.next_count();
      for (std::uint64_t e = 0; e < entries; ++e) {
        std::vector<TokenId> gram(k);
        for (auto& id : gram) {
          const std::uint64_t v = payload.next_count();
          if (v >= parsed.vocab.size()) throw Error(ErrorCode::kBadFormat, "token id out of range");
          id = static_cast<TokenId>(v);
        }
        counts[k - 1][gram] = payload.next_count();
      }
    }
    return std::make_unique<KneserNeyModel>(std::move(parsed.vocab), order, discount,
                                            std::move(counts));
  }
  if (backend == "neural") {
    const NeuralDims dims{field_size(m, "context_len"), field_size(m, "embed_dim"),
                          field_size(m, "hidden_dim")};
    NeuralLm shape = nn_zero(parsed.vocab, dims);
    NeuralParams params = shape.params();
    for (auto group : params.groups()) {
      for (double& w : group) {
        w = payload.next();
        if (!std::isfinite(w)) throw Error(ErrorCode::kBadFormat, "non-finite parameter");
      }
    }
    return std::make_unique<NeuralLm>(std::move(parsed.vocab), dims, std::move(params));
  }
  throw Error(ErrorCode::kBadFormat, "unknown backend '" + backend + "'");
}

std::unique_ptr<LanguageModel> load_model(const std::filesystem::path& path) {
  return parse_model(read_file(path));
}

std::string model_file_hash(const std::filesystem::path& path) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(read_file(path))));
  return buf;
}

}  // namespace lexdraft
