#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "faasflow/object_store.hpp"
#include "faasflow/select_engine.hpp"

namespace faasflow {

// Per-function resource configuration. vcpus = 0 derives worker
// parallelism from memory the way the platform convention ties them
// (1769 MB per vCPU, so 8192 MB provides 4).
struct ResourceConfig {
  std::uint32_t memory_mb = 1769;
  std::uint32_t vcpus = 0;
};

std::uint32_t effective_vcpus(const ResourceConfig& r);

// One unit of simulated FaaS work. Tasks are independent: every input
// object exists before the batch is submitted, and no task reads another
// in-flight task's output (the executor instruments this).
struct TaskSpec {
  std::uint64_t task_id = 0;
  std::string stage;
  std::vector<ObjectRef> inputs;
  std::map<std::string, std::string> params;
  ResourceConfig resources;
};

struct TaskResult {
  std::uint64_t task_id = 0;
  bool ok = false;
  std::string error;
  std::vector<ObjectRef> outputs;

  double fetch_s = 0;   // store reads, range reads, scans
  double compute_s = 0; // billed minus fetch minus store
  double store_s = 0;   // store writes
  double billed_s = 0;  // ended_at - started_at
  double started_at = 0;
  double ended_at = 0;

  std::uint64_t peak_est_bytes = 0;
  std::uint64_t bytes_fetched = 0;
  std::uint64_t bytes_stored = 0;
  std::uint64_t scan_bytes = 0;
  std::uint32_t attempts = 0;
  ResourceConfig resources;
};

// Concurrency record of one submitted batch. in-flight counts invocations
// that have been launched and have not completed; it never exceeds the
// configured limit.
struct FlightLog {
  std::vector<std::size_t> flight_sizes; // wave mode only
  std::vector<std::pair<double, int>> concurrency; // (time, in-flight) change points
  int max_in_flight = 0;
  std::size_t dependency_violations = 0;
};

// CSV rows "time,in_flight" for concurrency histograms.
std::string flight_log_csv(const FlightLog& log);

enum class SubmitMode { wave, streaming };
SubmitMode parse_submit_mode(std::string_view text);
std::string_view submit_mode_name(SubmitMode mode);

// Handler-side view of one running task: metered storage access plus the
// task's parameters. All fetch/scan time lands in fetch_s, writes in
// store_s; what remains of the billed window is compute.
class TaskContext {
public:
  TaskContext(ObjectStore& store, const TaskSpec& spec,
              std::chrono::steady_clock::time_point epoch);

  std::string get(const ObjectRef& ref);
  std::string get(std::string_view bucket, std::string_view key);
  std::string get_range(const ObjectRef& ref, std::uint64_t lo, std::uint64_t hi);
  ObjectRef put(std::string_view bucket, std::string_view key, std::string_view data);
  std::vector<std::string> list(std::string_view bucket, std::string_view prefix);
  ObjectRef head(std::string_view bucket, std::string_view key);
  ScanResult select(const ObjectRef& ref, const ScanQuery& query);

  const TaskSpec& spec() const { return spec_; }
  std::uint32_t vcpus() const { return effective_vcpus(spec_.resources); }

  const std::string& param(const std::string& name) const;
  std::string param_or(const std::string& name, std::string fallback) const;
  std::int64_t param_i64(const std::string& name) const;
  std::uint64_t param_u64(const std::string& name) const;
  double param_double(const std::string& name) const;

  // Handlers holding large in-memory state beyond what they transfer can
  // raise the working-set estimate.
  void note_working_set(std::uint64_t bytes);

private:
  friend class FaasExecutor;

  class Timed;
  void bump_peak();

  ObjectStore& store_;
  const TaskSpec& spec_;
  std::chrono::steady_clock::time_point epoch_;

  double started_at_ = 0;
  double ended_at_ = 0;
  double fetch_s_ = 0;
  double store_s_ = 0;
  std::uint64_t bytes_fetched_ = 0;
  std::uint64_t bytes_stored_ = 0;
  std::uint64_t scan_bytes_ = 0;
  std::uint64_t peak_est_bytes_ = 0;
  std::vector<ObjectRef> outputs_;
  std::vector<std::string> reads_;
  std::vector<std::string> writes_;
};

using StageHandler = std::function<void(TaskContext&)>;

class TaskRegistry {
public:
  void register_stage(std::string name, StageHandler handler);
  const StageHandler* find(const std::string& name) const;

private:
  std::map<std::string, StageHandler> handlers_;
};

struct ExecutorOptions {
  // Local worker threads driving launched tasks. Distinct from the
  // simulated concurrency limit: a launched invocation is in flight until
  // it completes, whichever worker runs it.
  std::size_t workers = 4;
  // Extra attempts after a failure; a task is reported failed once
  // 1 + retries attempts have all thrown. Per-task override via the
  // "retries" param.
  std::uint32_t retries = 2;
};

// Simulated FaaS backend: an asynchronous work queue with a hard
// concurrency limit. Wave mode launches ceil(n/limit) flights, each
// completing before the next starts; streaming mode launches a task the
// moment a slot frees. Results come back in task order either way.
class FaasExecutor {
public:
  FaasExecutor(ObjectStore& store, TaskRegistry registry, ExecutorOptions opts = {});

  std::pair<std::vector<TaskResult>, FlightLog>
  submit(const std::vector<TaskSpec>& tasks, std::size_t limit, SubmitMode mode);

  // Runs one task synchronously in the calling thread (same retry and
  // metering rules as a submitted task).
  TaskResult run_task(const TaskSpec& spec);

  ObjectStore& store() { return store_; }

private:
  TaskResult run_attempts(const TaskSpec& spec, std::chrono::steady_clock::time_point epoch,
                          std::vector<std::string>* reads, std::vector<std::string>* writes);

  ObjectStore& store_;
  TaskRegistry registry_;
  ExecutorOptions opts_;
};

// Sum over tasks of allocated GB times billed seconds.
double gbsec_total(std::span<const TaskResult> results);
double gbsec_cost(std::span<const TaskResult> results, double usd_per_gbsec);

} // namespace faasflow
