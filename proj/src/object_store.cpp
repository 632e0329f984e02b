#include "faasflow/object_store.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iterator>
#include <system_error>
#include <thread>

#include "faasflow/errors.hpp"
#include "faasflow/text.hpp"

namespace fs = std::filesystem;

namespace faasflow {

namespace {

void validate_bucket(std::string_view bucket) {
  if (bucket.empty() || bucket.find('/') != std::string_view::npos) {
    throw StoreError("invalid bucket name: '" + std::string(bucket) + "'");
  }
}

void validate_key(std::string_view key) {
  if (key.empty() || key.front() == '/') {
    throw StoreError("invalid object key: '" + std::string(key) + "'");
  }
  for (std::string_view part : split(key, '/')) {
    if (part.empty() || part == "." || part == "..") {
      throw StoreError("invalid object key: '" + std::string(key) + "'");
    }
  }
}

} // namespace

ObjectStore::ObjectStore(fs::path root) : root_(std::move(root)) {
  staging_ = root_ / ".staging";
  fs::create_directories(staging_);
}

fs::path ObjectStore::object_path(std::string_view bucket, std::string_view key) const {
  validate_bucket(bucket);
  validate_key(key);
  fs::path p = root_ / bucket;
  for (std::string_view part : split(key, '/')) {
    p /= part;
  }
  return p;
}

void ObjectStore::throttle(std::uint64_t bytes) const {
  std::uint64_t bps = bandwidth_bps_;
  if (bps == 0 || bytes == 0) {
    return;
  }
  auto ns = static_cast<std::int64_t>(
      (static_cast<double>(bytes) / static_cast<double>(bps)) * 1e9);
  std::this_thread::sleep_for(std::chrono::nanoseconds(ns));
}

std::string ObjectStore::read_file(const fs::path& path, std::string_view id) const {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw NotFoundError("object not found: " + std::string(id));
  }
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) {
    throw StoreError("read failed: " + std::string(id));
  }
  return data;
}

ObjectRef ObjectStore::put(std::string_view bucket, std::string_view key, std::string_view data) {
  fs::path target = object_path(bucket, key);
  std::error_code ec;
  fs::create_directories(target.parent_path(), ec);
  if (ec) {
    throw StoreError("cannot create bucket path for " + std::string(key) + ": " + ec.message());
  }

  fs::path tmp = staging_ / ("put-" + std::to_string(staging_seq_.fetch_add(1)));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw StoreError("cannot open staging file for " + std::string(key));
    }
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) {
      throw StoreError("write failed: " + std::string(key));
    }
  }
  fs::rename(tmp, target, ec);
  if (ec) {
    throw StoreError("rename failed for " + std::string(key) + ": " + ec.message());
  }

  bytes_written_ += data.size();
  throttle(data.size());
  {
    std::lock_guard<std::mutex> lock(log_mu_);
    write_log_.push_back(std::string(bucket) + "/" + std::string(key));
  }
  return ObjectRef{std::string(bucket), std::string(key), data.size()};
}

std::string ObjectStore::get(const ObjectRef& ref) const {
  return get(ref.bucket, ref.key);
}

std::string ObjectStore::get(std::string_view bucket, std::string_view key) const {
  std::string id = std::string(bucket) + "/" + std::string(key);
  std::string data = read_file(object_path(bucket, key), id);
  bytes_read_ += data.size();
  throttle(data.size());
  return data;
}

std::string ObjectStore::get_range(const ObjectRef& ref, std::uint64_t lo, std::uint64_t hi) const {
  if (lo > hi) {
    throw RangeError("invalid range [" + std::to_string(lo) + ", " + std::to_string(hi) +
                     ") for " + ref.id());
  }
  std::ifstream in(object_path(ref.bucket, ref.key), std::ios::binary);
  if (!in) {
    throw NotFoundError("object not found: " + ref.id());
  }
  in.seekg(0, std::ios::end);
  auto size = static_cast<std::uint64_t>(in.tellg());
  if (hi > size) {
    throw RangeError("range [" + std::to_string(lo) + ", " + std::to_string(hi) +
                     ") exceeds size " + std::to_string(size) + " of " + ref.id());
  }
  std::string data(hi - lo, '\0');
  in.seekg(static_cast<std::streamoff>(lo));
  in.read(data.data(), static_cast<std::streamsize>(data.size()));
  if (!in && !data.empty()) {
    throw StoreError("range read failed: " + ref.id());
  }
  bytes_read_ += data.size();
  throttle(data.size());
  return data;
}

std::vector<std::string> ObjectStore::list(std::string_view bucket, std::string_view prefix) const {
  validate_bucket(bucket);
  fs::path dir = root_ / bucket;
  std::vector<std::string> keys;
  if (!fs::exists(dir)) {
    return keys;
  }
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) {
      continue;
    }
    std::string key = fs::relative(entry.path(), dir).generic_string();
    if (starts_with(key, prefix)) {
      keys.push_back(std::move(key));
    }
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

ObjectRef ObjectStore::head(std::string_view bucket, std::string_view key) const {
  fs::path path = object_path(bucket, key);
  std::error_code ec;
  auto size = fs::file_size(path, ec);
  if (ec) {
    throw NotFoundError("object not found: " + std::string(bucket) + "/" + std::string(key));
  }
  return ObjectRef{std::string(bucket), std::string(key), size};
}

void ObjectStore::remove(std::string_view bucket, std::string_view key) {
  fs::path path = object_path(bucket, key);
  std::error_code ec;
  if (!fs::remove(path, ec) || ec) {
    throw NotFoundError("object not found: " + std::string(bucket) + "/" + std::string(key));
  }
}

std::string ObjectStore::read_for_scan(const ObjectRef& ref) const {
  return read_file(object_path(ref.bucket, ref.key), ref.id());
}

std::vector<std::string> ObjectStore::write_log() const {
  std::lock_guard<std::mutex> lock(log_mu_);
  return write_log_;
}

} // namespace faasflow
