#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace faasflow {

// Location of one stored object. (bucket, key) identifies it; size is the
// exact byte length at the time the ref was produced.
struct ObjectRef {
  std::string bucket;
  std::string key;
  std::uint64_t size = 0;

  std::string id() const { return bucket + "/" + key; }
  bool operator==(const ObjectRef&) const = default;
};

// Filesystem-backed object storage standing in for cloud object storage.
// One file per object under root/bucket/key. Overwrites are atomic
// (write-to-staging, then rename), so concurrent readers see either the
// old or the new object in full. Byte ranges are half-open [lo, hi).
//
// An optional bandwidth throttle models object-storage transfer latency:
// get/get_range/put sleep size/bandwidth seconds when enabled. Server-side
// scans (the select engine) bypass it via read_for_scan.
class ObjectStore {
public:
  explicit ObjectStore(std::filesystem::path root);

  ObjectRef put(std::string_view bucket, std::string_view key, std::string_view data);
  std::string get(const ObjectRef& ref) const;
  std::string get(std::string_view bucket, std::string_view key) const;
  std::string get_range(const ObjectRef& ref, std::uint64_t lo, std::uint64_t hi) const;
  // Lexicographically sorted keys in `bucket` beginning with `prefix`.
  std::vector<std::string> list(std::string_view bucket, std::string_view prefix) const;
  // Metadata only; no body bytes transferred.
  ObjectRef head(std::string_view bucket, std::string_view key) const;
  void remove(std::string_view bucket, std::string_view key);

  // Whole-object read for server-side scans: no throttle, counted as
  // scanned rather than transferred.
  std::string read_for_scan(const ObjectRef& ref) const;

  // Applies the bandwidth throttle to `bytes` without touching any
  // object, for callers that transfer derived payloads (scan results).
  void simulate_transfer(std::uint64_t bytes) const { throttle(bytes); }

  const std::filesystem::path& root() const { return root_; }

  // 0 disables the throttle (the default).
  void set_bandwidth_bytes_per_sec(std::uint64_t bps) { bandwidth_bps_ = bps; }
  std::uint64_t bandwidth_bytes_per_sec() const { return bandwidth_bps_; }

  std::uint64_t bytes_read() const { return bytes_read_; }
  std::uint64_t bytes_written() const { return bytes_written_; }

  // Every key written since construction, as "bucket/key", in put order.
  std::vector<std::string> write_log() const;

private:
  std::filesystem::path object_path(std::string_view bucket, std::string_view key) const;
  void throttle(std::uint64_t bytes) const;
  std::string read_file(const std::filesystem::path& path, std::string_view id) const;

  std::filesystem::path root_;
  std::filesystem::path staging_;
  std::atomic<std::uint64_t> bandwidth_bps_{0};
  mutable std::atomic<std::uint64_t> bytes_read_{0};
  std::atomic<std::uint64_t> bytes_written_{0};
  std::atomic<std::uint64_t> staging_seq_{0};
  mutable std::mutex log_mu_;
  std::vector<std::string> write_log_;
};

} // namespace faasflow
