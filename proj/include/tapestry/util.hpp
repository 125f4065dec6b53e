#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>

namespace tapestry {

std::string read_text_file(const std::filesystem::path& path);
std::string read_binary_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
void write_binary_file(const std::filesystem::path& path, const std::string& bytes);

/// Runs body(begin, end) over contiguous chunks of [0, count). Each index is
/// visited exactly once; callers must write only to index-owned slots so the
/// result does not depend on the thread count.
void parallel_for(std::size_t count, const std::function<void(std::size_t, std::size_t)>& body);

/// Thread count used by parallel_for; TAPESTRY_THREADS overrides hardware concurrency.
unsigned worker_count();

/// Writes into a sibling staging directory and renames it over `target` once
/// `commit()` is called. Destruction without commit removes the staging tree.
class StagedDirectory {
 public:
  explicit StagedDirectory(std::filesystem::path target);
  ~StagedDirectory();
  StagedDirectory(const StagedDirectory&) = delete;
  StagedDirectory& operator=(const StagedDirectory&) = delete;

  const std::filesystem::path& path() const { return staging_; }
  const std::filesystem::path& target() const { return target_; }
  void commit();

 private:
  std::filesystem::path target_;
  std::filesystem::path staging_;
  bool committed_ = false;
};

} // namespace tapestry
