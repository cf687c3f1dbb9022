#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "evpred/errors.hpp"
#include "evpred/eval.hpp"
#include "evpred/seq2seq.hpp"

namespace evpred {
namespace {

constexpr std::string_view kEndHeader = "end_header";

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

void write_le(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char bytes[8];
  for (int k = 0; k < 8; ++k) bytes[k] = static_cast<unsigned char>(bits >> (8 * k));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

double read_le(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw FormatError("checkpoint payload truncated");
  std::uint64_t bits = 0;
  for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(bytes[k]) << (8 * k);
  return std::bit_cast<double>(bits);
}

std::size_t to_size(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw FormatError("checkpoint header: bad integer for " + key);
  }
}

bool to_bool(const std::string& s, const std::string& key) {
  if (s == "on") return true;
  if (s == "off") return false;
  throw FormatError("checkpoint header: bad on/off value for " + key);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Seq2SeqModel& model,
                     std::uint64_t vocab_hash, std::size_t epoch) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::invalid_argument("cannot write " + path.string());
  const auto& c = model.config();
  out << kCheckpointMagic << '\n';
  out << "cell=" << to_string(c.cell) << '\n';
  out << "layers=" << c.layers << '\n';
  out << "attention=" << (c.attention ? "on" : "off") << '\n';
  out << "bidirectional=" << (c.bidirectional ? "on" : "off") << '\n';
  out << "hidden=" << c.hidden << '\n';
  out << "embed_dim=" << c.embed_dim << '\n';
  out << "vocab_size=" << c.vocab_size << '\n';
  out << "dropout=" << format_double(c.dropout) << '\n';
  out << "max_decode_len=" << c.max_decode_len << '\n';
  out << "vocab_hash=" << hex64(vocab_hash) << '\n';
  out << "epoch=" << epoch << '\n';
  for (const auto& [name, p] : model.params()) {
    out << "tensor " << name << " float64 " << p.value.rank();
    for (auto d : p.value.shape()) out << ' ' << d;
    out << '\n';
  }
  out << kEndHeader << '\n';
  for (const auto& [name, p] : model.params()) {
    for (double v : p.value.values()) write_le(out, v);
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

std::unique_ptr<Seq2SeqModel> load_checkpoint(const std::filesystem::path& path, Checkpoint* meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic) {
    throw FormatError("not a checkpoint file (bad magic): " + path.string());
  }
  std::map<std::string, std::string> kv;
  std::vector<std::pair<std::string, std::vector<std::size_t>>> manifest;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == kEndHeader) {
      ended = true;
      break;
    }
    if (line.rfind("tensor ", 0) == 0) {
      std::istringstream ls(line.substr(7));
      std::string name, dtype;
      std::size_t rank = 0;
      if (!(ls >> name >> dtype >> rank) || dtype != "float64") {
        throw FormatError("checkpoint manifest: bad tensor line '" + line + "'");
      }
      std::vector<std::size_t> shape(rank);
      for (auto& d : shape) {
        if (!(ls >> d)) throw FormatError("checkpoint manifest: bad shape for " + name);
      }
      manifest.emplace_back(name, std::move(shape));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("checkpoint header: bad line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (!ended) throw FormatError("checkpoint header is not terminated");

  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError("checkpoint header: missing " + key);
    return it->second;
  };
  Checkpoint ck;
  try {
    ck.config.cell = parse_cell_kind(get("cell"));
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
  ck.config.layers = to_size(get("layers"), "layers");
  ck.config.attention = to_bool(get("attention"), "attention");
  ck.config.bidirectional = to_bool(get("bidirectional"), "bidirectional");
  ck.config.hidden = to_size(get("hidden"), "hidden");
  ck.config.embed_dim = to_size(get("embed_dim"), "embed_dim");
  ck.config.vocab_size = to_size(get("vocab_size"), "vocab_size");
  try {
    ck.config.dropout = std::stod(get("dropout"));
    ck.vocab_hash = std::stoull(get("vocab_hash"), nullptr, 16);
  } catch (const std::logic_error&) {
    throw FormatError("checkpoint header: bad dropout or vocab_hash");
  }
  ck.config.max_decode_len = to_size(get("max_decode_len"), "max_decode_len");
  ck.epoch = to_size(get("epoch"), "epoch");

  std::unique_ptr<Seq2SeqModel> model;
  try {
    model = std::make_unique<Seq2SeqModel>(ck.config, 0);
  } catch (const ConfigError& e) {
    throw IntegrityError(std::string("checkpoint config invalid: ") + e.what());
  }
  if (manifest.size() != model->params().size()) {
    throw IntegrityError("checkpoint manifest lists " + std::to_string(manifest.size()) +
                         " tensors, architecture has " + std::to_string(model->params().size()));
  }
  auto it = model->params().begin();
  for (const auto& [name, shape] : manifest) {
    if (it->first != name || it->second.value.shape() != shape) {
      throw IntegrityError("checkpoint tensor " + name + " " + shape_string(shape) +
                           " does not match architecture tensor " + it->first + " " +
                           shape_string(it->second.value.shape()));
    }
    ++it;
  }
  for (auto& [name, p] : model->params()) {
    for (double& v : p.value.values()) v = read_le(in);
    if (!p.value.all_finite()) throw IntegrityError("checkpoint tensor " + name + " has non-finite values");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after checkpoint payload");
  if (meta != nullptr) *meta = ck;
  return model;
}

}  // namespace evpred
