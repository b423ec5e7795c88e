#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>

#include <openssl/evp.h>

#include <json.hpp>

#include <cfm/common.hpp>

namespace cfm {

inline std::string file_sha256(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for hashing: " + path.string());

  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw IoError("sha256 init failed");
  }
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof(buf));
    if (f.gcount() > 0)
      EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(f.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);

  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

// Ledger of one experiment directory: the effective config, input hashes,
// and every produced file with its checksum.
class RunManifest {
 public:
  explicit RunManifest(std::filesystem::path out_dir)
      : out_dir_(std::move(out_dir)), path_(out_dir_ / "manifest.json") {
    if (std::filesystem::exists(path_)) {
      std::ifstream f(path_);
      f >> doc_;
    } else {
      doc_ = nlohmann::json::object();
      doc_["created"] = timestamp();
      doc_["files"] = nlohmann::json::object();
    }
  }

  void set_config(const nlohmann::json& cfg) { doc_["config"] = cfg; }

  // Registers a file living under the experiment directory.
  void record(const std::filesystem::path& file) {
    const auto rel =
        std::filesystem::relative(file, out_dir_).generic_string();
    doc_["files"][rel] = {
        {"sha256", file_sha256(file)},
        {"bytes", std::filesystem::file_size(file)},
    };
  }

  void save() {
    doc_["updated"] = timestamp();
    std::filesystem::create_directories(out_dir_);
    std::ofstream f(path_, std::ios::trunc);
    if (!f) throw IoError("cannot write manifest: " + path_.string());
    f << doc_.dump(2) << "\n";
  }

  const nlohmann::json& json() const { return doc_; }

 private:
  static std::string timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&t));
    return buf;
  }

  std::filesystem::path out_dir_;
  std::filesystem::path path_;
  nlohmann::json doc_;
};

// Exclusive ownership of an experiment directory for one process.
class DirLock {
 public:
  explicit DirLock(const std::filesystem::path& out_dir)
      : path_(out_dir / ".lock") {
    std::filesystem::create_directories(out_dir);
    if (std::filesystem::exists(path_))
      throw IoError("experiment directory is locked: " + path_.string());
    std::ofstream f(path_);
    f << "pid unknown\n";
  }

  ~DirLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }

  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  std::filesystem::path path_;
};

inline void append_jsonl(const std::filesystem::path& path,
                         const nlohmann::json& record) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::app);
  if (!f) throw IoError("cannot append: " + path.string());
  f << record.dump() << "\n";
}

}  // namespace cfm
