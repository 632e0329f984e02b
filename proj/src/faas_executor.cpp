#include "faasflow/faas_executor.hpp"

#include <algorithm>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "faasflow/errors.hpp"
#include "faasflow/text.hpp"

namespace faasflow {

using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point epoch, Clock::time_point t) {
  return std::chrono::duration<double>(t - epoch).count();
}

} // namespace

std::uint32_t effective_vcpus(const ResourceConfig& r) {
  if (r.vcpus > 0) {
    return r.vcpus;
  }
  return std::max<std::uint32_t>(1, r.memory_mb / 1769);
}

std::string flight_log_csv(const FlightLog& log) {
  std::string out = "time,in_flight\n";
  for (const auto& [t, n] : log.concurrency) {
    out += format_fixed6(t);
    out += ',';
    out += std::to_string(n);
    out += '\n';
  }
  return out;
}

SubmitMode parse_submit_mode(std::string_view text) {
  if (text == "wave") {
    return SubmitMode::wave;
  }
  if (text == "streaming") {
    return SubmitMode::streaming;
  }
  throw ConfigError("unknown executor mode: '" + std::string(text) +
                    "' (expected wave or streaming)");
}

std::string_view submit_mode_name(SubmitMode mode) {
  return mode == SubmitMode::wave ? "wave" : "streaming";
}

// ---------------------------------------------------------------------------
// TaskContext

class TaskContext::Timed {
public:
  Timed(double& sink) : sink_(sink), begin_(Clock::now()) {}
  ~Timed() { sink_ += std::chrono::duration<double>(Clock::now() - begin_).count(); }

private:
  double& sink_;
  Clock::time_point begin_;
};

TaskContext::TaskContext(ObjectStore& store, const TaskSpec& spec, Clock::time_point epoch)
    : store_(store), spec_(spec), epoch_(epoch) {}

void TaskContext::bump_peak() {
  peak_est_bytes_ = std::max(peak_est_bytes_, bytes_fetched_ + bytes_stored_);
}

std::string TaskContext::get(const ObjectRef& ref) {
  Timed timer(fetch_s_);
  std::string data = store_.get(ref);
  bytes_fetched_ += data.size();
  reads_.push_back(ref.id());
  bump_peak();
  return data;
}

std::string TaskContext::get(std::string_view bucket, std::string_view key) {
  Timed timer(fetch_s_);
  std::string data = store_.get(bucket, key);
  bytes_fetched_ += data.size();
  reads_.push_back(std::string(bucket) + "/" + std::string(key));
  bump_peak();
  return data;
}

std::string TaskContext::get_range(const ObjectRef& ref, std::uint64_t lo, std::uint64_t hi) {
  Timed timer(fetch_s_);
  std::string data = store_.get_range(ref, lo, hi);
  bytes_fetched_ += data.size();
  reads_.push_back(ref.id());
  bump_peak();
  return data;
}

ObjectRef TaskContext::put(std::string_view bucket, std::string_view key, std::string_view data) {
  Timed timer(store_s_);
  ObjectRef ref = store_.put(bucket, key, data);
  bytes_stored_ += data.size();
  writes_.push_back(ref.id());
  outputs_.push_back(ref);
  bump_peak();
  return ref;
}

std::vector<std::string> TaskContext::list(std::string_view bucket, std::string_view prefix) {
  Timed timer(fetch_s_);
  return store_.list(bucket, prefix);
}

ObjectRef TaskContext::head(std::string_view bucket, std::string_view key) {
  Timed timer(fetch_s_);
  return store_.head(bucket, key);
}

ScanResult TaskContext::select(const ObjectRef& ref, const ScanQuery& query) {
  Timed timer(fetch_s_);
  ScanResult result = select_object(store_, ref, query);
  scan_bytes_ += result.second.bytes_scanned;
  std::uint64_t payload = 0;
  for (const ScanRow& row : result.first) {
    for (const std::string& field : row) {
      payload += field.size() + 1;
    }
  }
  bytes_fetched_ += payload;
  store_.simulate_transfer(payload);
  reads_.push_back(ref.id());
  bump_peak();
  return result;
}

const std::string& TaskContext::param(const std::string& name) const {
  auto it = spec_.params.find(name);
  if (it == spec_.params.end()) {
    throw ConfigError("stage '" + spec_.stage + "' task " + std::to_string(spec_.task_id) +
                      ": missing param '" + name + "'");
  }
  return it->second;
}

std::string TaskContext::param_or(const std::string& name, std::string fallback) const {
  auto it = spec_.params.find(name);
  return it == spec_.params.end() ? std::move(fallback) : it->second;
}

std::int64_t TaskContext::param_i64(const std::string& name) const {
  return parse_i64(param(name), "param '" + name + "'");
}

std::uint64_t TaskContext::param_u64(const std::string& name) const {
  return parse_u64(param(name), "param '" + name + "'");
}

double TaskContext::param_double(const std::string& name) const {
  const std::string& text = param(name);
  try {
    std::size_t consumed = 0;
    double v = std::stod(text, &consumed);
    if (consumed != text.size()) {
      throw std::invalid_argument(text);
    }
    return v;
  } catch (const std::exception&) {
    throw ConfigError("param '" + name + "': not a number: '" + text + "'");
  }
}

void TaskContext::note_working_set(std::uint64_t bytes) {
  peak_est_bytes_ = std::max(peak_est_bytes_, bytes);
}

// ---------------------------------------------------------------------------
// Registry

void TaskRegistry::register_stage(std::string name, StageHandler handler) {
  handlers_[std::move(name)] = std::move(handler);
}

const StageHandler* TaskRegistry::find(const std::string& name) const {
  auto it = handlers_.find(name);
  return it == handlers_.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------------------
// Executor

FaasExecutor::FaasExecutor(ObjectStore& store, TaskRegistry registry, ExecutorOptions opts)
    : store_(store), registry_(std::move(registry)), opts_(opts) {
  if (opts_.workers == 0) {
    throw ConfigError("executor needs at least one worker");
  }
}

TaskResult FaasExecutor::run_attempts(const TaskSpec& spec, Clock::time_point epoch,
                                      std::vector<std::string>* reads,
                                      std::vector<std::string>* writes) {
  TaskResult result;
  result.task_id = spec.task_id;
  result.resources = spec.resources;

  std::uint32_t retries = opts_.retries;
  if (auto it = spec.params.find("retries"); it != spec.params.end()) {
    retries = static_cast<std::uint32_t>(parse_u64(it->second, "param 'retries'"));
  }

  const StageHandler* handler = registry_.find(spec.stage);
  for (std::uint32_t attempt = 1; attempt <= 1 + retries; ++attempt) {
    TaskContext ctx(store_, spec, epoch);
    result.attempts = attempt;
    ctx.started_at_ = seconds_since(epoch, Clock::now());
    try {
      if (!handler) {
        throw ConfigError("no handler registered for stage '" + spec.stage + "'");
      }
      (*handler)(ctx);
      result.ok = true;
    } catch (const std::exception& e) {
      result.ok = false;
      result.error = spec.stage + " task " + std::to_string(spec.task_id) + ": " + e.what();
    }
    ctx.ended_at_ = seconds_since(epoch, Clock::now());

    result.started_at = ctx.started_at_;
    result.ended_at = ctx.ended_at_;
    result.billed_s = ctx.ended_at_ - ctx.started_at_;
    result.fetch_s = ctx.fetch_s_;
    result.store_s = ctx.store_s_;
    result.compute_s = std::max(0.0, result.billed_s - ctx.fetch_s_ - ctx.store_s_);
    result.bytes_fetched = ctx.bytes_fetched_;
    result.bytes_stored = ctx.bytes_stored_;
    result.scan_bytes = ctx.scan_bytes_;
    result.peak_est_bytes = ctx.peak_est_bytes_;
    result.outputs = ctx.outputs_;
    if (reads) {
      *reads = ctx.reads_;
    }
    if (writes) {
      *writes = ctx.writes_;
    }
    if (result.ok) {
      break;
    }
  }
  return result;
}

TaskResult FaasExecutor::run_task(const TaskSpec& spec) {
  return run_attempts(spec, Clock::now(), nullptr, nullptr);
}

std::pair<std::vector<TaskResult>, FlightLog>
FaasExecutor::submit(const std::vector<TaskSpec>& tasks, std::size_t limit, SubmitMode mode) {
  if (limit == 0) {
    throw ConfigError("concurrency limit must be at least 1");
  }

  const std::size_t n = tasks.size();
  std::vector<TaskResult> results(n);
  std::vector<std::vector<std::string>> reads(n);
  std::vector<std::vector<std::string>> writes(n);
  FlightLog log;
  if (n == 0) {
    return {std::move(results), std::move(log)};
  }

  const Clock::time_point epoch = Clock::now();

  std::mutex mu;
  std::condition_variable work_ready;
  std::condition_variable progress;
  std::deque<std::size_t> queue;
  std::size_t completed = 0;
  int in_flight = 0;
  bool shutdown = false;

  auto record = [&](int flights_in_flight) {
    log.concurrency.emplace_back(seconds_since(epoch, Clock::now()), flights_in_flight);
    log.max_in_flight = std::max(log.max_in_flight, flights_in_flight);
  };

  // Launch = the invocation is handed to the platform and occupies one of
  // the `limit` slots until it completes. Must be called under mu.
  auto launch = [&](std::size_t index) {
    queue.push_back(index);
    ++in_flight;
    record(in_flight);
    work_ready.notify_one();
  };

  auto worker_loop = [&]() {
    while (true) {
      std::size_t index;
      {
        std::unique_lock<std::mutex> lock(mu);
        work_ready.wait(lock, [&] { return shutdown || !queue.empty(); });
        if (queue.empty()) {
          return;
        }
        index = queue.front();
        queue.pop_front();
      }
      TaskResult r = run_attempts(tasks[index], epoch, &reads[index], &writes[index]);
      {
        std::lock_guard<std::mutex> lock(mu);
        results[index] = std::move(r);
        --in_flight;
        ++completed;
        record(in_flight);
        progress.notify_all();
      }
    }
  };

  std::vector<std::thread> pool;
  std::size_t nworkers = std::min(opts_.workers, n);
  pool.reserve(nworkers);
  for (std::size_t w = 0; w < nworkers; ++w) {
    pool.emplace_back(worker_loop);
  }

  if (mode == SubmitMode::wave) {
    for (std::size_t begin = 0; begin < n; begin += limit) {
      std::size_t end = std::min(n, begin + limit);
      {
        std::lock_guard<std::mutex> lock(mu);
        for (std::size_t i = begin; i < end; ++i) {
          launch(i);
        }
      }
      log.flight_sizes.push_back(end - begin);
      std::unique_lock<std::mutex> lock(mu);
      progress.wait(lock, [&] { return completed == end; });
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      std::unique_lock<std::mutex> lock(mu);
      progress.wait(lock, [&] { return in_flight < static_cast<int>(limit); });
      launch(i);
    }
    std::unique_lock<std::mutex> lock(mu);
    progress.wait(lock, [&] { return completed == n; });
  }

  {
    std::lock_guard<std::mutex> lock(mu);
    shutdown = true;
    work_ready.notify_all();
  }
  for (std::thread& t : pool) {
    t.join();
  }

  // A task consuming another in-batch task's output would have needed a
  // blocking wait on a real platform; flag it.
  std::unordered_map<std::string, std::size_t> writer;
  for (std::size_t i = 0; i < n; ++i) {
    for (const std::string& id : writes[i]) {
      writer.emplace(id, i);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (const std::string& id : reads[i]) {
      auto it = writer.find(id);
      if (it != writer.end() && it->second != i) {
        ++log.dependency_violations;
      }
    }
  }

  return {std::move(results), std::move(log)};
}

double gbsec_total(std::span<const TaskResult> results) {
  double total = 0;
  for (const TaskResult& r : results) {
    total += (static_cast<double>(r.resources.memory_mb) / 1024.0) * r.billed_s;
  }
  return total;
}

double gbsec_cost(std::span<const TaskResult> results, double usd_per_gbsec) {
  if (usd_per_gbsec < 0) {
    throw ConfigError("usd_per_gbsec must be non-negative");
  }
  return gbsec_total(results) * usd_per_gbsec;
}

} // namespace faasflow
