#include "evpred/config.hpp"

#include <fstream>
#include <sstream>

#include "evpred/errors.hpp"
#include "evpred/eval.hpp"

namespace evpred {
namespace {

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    if (!v.empty() && v.front() == '-') throw std::invalid_argument(v);
    const auto x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

bool parse_switch(const std::string& key, const std::string& v) {
  if (v == "on") return true;
  if (v == "off") return false;
  throw ConfigError("config key '" + key + "': expected on or off, got '" + v + "'");
}

const char* on_off(bool b) { return b ? "on" : "off"; }

}  // namespace

void set_config_value(RunConfig& c, const std::string& key, const std::string& value) {
  if (key == "train") {
    c.train_path = value;
  } else if (key == "dev") {
    c.dev_path = value;
  } else if (key == "output_dir") {
    c.output_dir = value;
  } else if (key == "embeddings") {
    c.embeddings_path = value;
  } else if (key == "cell") {
    c.model.cell = parse_cell_kind(value);
  } else if (key == "layers") {
    c.model.layers = parse_uint(key, value);
  } else if (key == "attention") {
    c.model.attention = parse_switch(key, value);
  } else if (key == "bidirectional") {
    c.model.bidirectional = parse_switch(key, value);
  } else if (key == "hidden") {
    c.model.hidden = parse_uint(key, value);
  } else if (key == "embed_dim") {
    c.model.embed_dim = parse_uint(key, value);
  } else if (key == "dropout") {
    c.model.dropout = parse_real(key, value);
  } else if (key == "max_decode_len") {
    c.model.max_decode_len = parse_uint(key, value);
  } else if (key == "lr") {
    c.lr = parse_real(key, value);
  } else if (key == "batch_size") {
    c.batch_size = parse_uint(key, value);
  } else if (key == "epochs") {
    c.epochs = parse_uint(key, value);
  } else if (key == "seed") {
    c.seed = parse_uint(key, value);
  } else if (key == "vocab_size") {
    c.vocab_size = parse_uint(key, value);
  } else if (key == "clip_norm") {
    c.clip_norm = parse_real(key, value);
  } else if (key == "threads") {
    c.threads = static_cast<int>(parse_uint(key, value));
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

std::string serialize(const RunConfig& c) {
  std::ostringstream os;
  os << "train=" << c.train_path << '\n'
     << "dev=" << c.dev_path << '\n'
     << "output_dir=" << c.output_dir << '\n'
     << "embeddings=" << c.embeddings_path << '\n'
     << "cell=" << to_string(c.model.cell) << '\n'
     << "layers=" << c.model.layers << '\n'
     << "attention=" << on_off(c.model.attention) << '\n'
     << "bidirectional=" << on_off(c.model.bidirectional) << '\n'
     << "hidden=" << c.model.hidden << '\n'
     << "embed_dim=" << c.model.embed_dim << '\n'
     << "dropout=" << format_double(c.model.dropout) << '\n'
     << "max_decode_len=" << c.model.max_decode_len << '\n'
     << "lr=" << format_double(c.lr) << '\n'
     << "batch_size=" << c.batch_size << '\n'
     << "epochs=" << c.epochs << '\n'
     << "seed=" << c.seed << '\n'
     << "vocab_size=" << c.vocab_size << '\n'
     << "clip_norm=" << format_double(c.clip_norm) << '\n'
     << "threads=" << c.threads << '\n';
  return os.str();
}

RunConfig parse_run_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("expected key=value", line_no);
    try {
      set_config_value(base, line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), std::move(base));
}

}  // namespace evpred
