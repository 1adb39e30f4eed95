#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "darol/common.hpp"

namespace darol::io {

// Every persistent artifact is one text file: a magic/version line, a JSON
// header, a '---' separator, data rows of %.17g doubles, and a trailing
// FNV-1a 64 checksum over all preceding bytes. Text with 17 significant
// digits reproduces doubles exactly, so save/load round-trips bit for bit.
struct TextArtifact {
  std::string magic;
  nlohmann::json header;
  std::vector<Vec> rows;
};

inline std::string checksum_line(std::uint64_t h) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "checksum fnv1a64 %016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

inline std::string serialize(const TextArtifact& artifact) {
  std::string body = artifact.magic;
  body += '\n';
  body += artifact.header.dump(2);
  body += "\n---\n";
  for (const Vec& row : artifact.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) body += ' ';
      body += format_double(row[i]);
    }
    body += '\n';
  }
  body += checksum_line(fnv1a64(body));
  body += '\n';
  return body;
}

inline TextArtifact parse(const std::string& content,
                          const std::string& expected_magic) {
  const std::size_t first_nl = content.find('\n');
  if (first_nl == std::string::npos)
    throw ConfigError("artifact parse: truncated file");
  const std::string magic = content.substr(0, first_nl);
  if (magic != expected_magic)
    throw ConfigError("artifact parse: expected '" + expected_magic +
                      "' but found '" + magic + "' (version mismatch?)");

  const std::size_t check_pos = content.rfind("checksum fnv1a64 ");
  if (check_pos == std::string::npos)
    throw ConfigError("artifact parse: missing checksum line");
  const std::string stored_hex = content.substr(check_pos + 17, 16);
  const std::uint64_t computed = fnv1a64(content.data(), check_pos);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(computed));
  if (stored_hex != buf)
    throw ConfigError("artifact parse: checksum mismatch (file corrupted)");

  const std::size_t sep = content.find("\n---\n", first_nl);
  if (sep == std::string::npos || sep > check_pos)
    throw ConfigError("artifact parse: missing header separator");

  TextArtifact artifact;
  artifact.magic = magic;
  artifact.header =
      nlohmann::json::parse(content.substr(first_nl + 1, sep - first_nl - 1));

  std::istringstream rows(content.substr(sep + 5, check_pos - sep - 5));
  std::string line;
  while (std::getline(rows, line)) {
    if (line.empty()) continue;
    Vec row;
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) row.push_back(std::strtod(tok.c_str(), nullptr));
    artifact.rows.push_back(std::move(row));
  }
  return artifact;
}

inline void save_file(const TextArtifact& artifact, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  const std::string body = serialize(artifact);
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!out) throw ConfigError("write failed: " + path);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline TextArtifact load_file(const std::string& path,
                              const std::string& expected_magic) {
  return parse(read_file(path), expected_magic);
}

}  // namespace darol::io
