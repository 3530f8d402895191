#include "voteflow/executor/executor.hpp"

#include <algorithm>
#include <condition_variable>
#include <mutex>
#include <thread>

#include "voteflow/error.hpp"
#include "voteflow/hash.hpp"

namespace voteflow::executor {

using backends::AgentOutput;
using backends::BackendError;
using backends::BackendFailure;
using Clock = std::chrono::steady_clock;

void AgentPool::add(std::shared_ptr<backends::Agent> agent) {
  if (!agent) throw ValidationError("cannot add a null agent");
  if (find(agent->name())) throw ValidationError("duplicate backend name '" + agent->name() + "'");
  agents_.push_back(std::move(agent));
}

std::shared_ptr<backends::Agent> AgentPool::find(std::string_view name) const {
  for (const auto& a : agents_) {
    if (a->name() == name) return a;
  }
  return nullptr;
}

std::vector<std::string> AgentPool::names() const {
  std::vector<std::string> out;
  for (const auto& a : agents_) out.push_back(a->name());
  return out;
}

std::vector<std::shared_ptr<backends::Agent>> AgentPool::select(const graph::SamplingConfig& sampling) const {
  if (sampling.model_pool.empty()) {
    if (agents_.empty()) throw ValidationError("the backend pool is empty");
    return agents_;
  }
  std::vector<std::shared_ptr<backends::Agent>> out;
  for (const auto& name : sampling.model_pool) {
    auto a = find(name);
    if (!a) throw ValidationError("model_pool names unknown backend '" + name + "'");
    out.push_back(std::move(a));
  }
  return out;
}

std::uint64_t sample_seed(std::uint64_t run_seed, std::string_view task_id, std::size_t sample_index, int round) {
  return stable_hash(run_seed, task_id, static_cast<std::uint64_t>(sample_index), round);
}

std::vector<std::size_t> assign_backends(std::size_t pool_size, std::size_t first_index, std::size_t count) {
  if (pool_size == 0) throw ValidationError("cannot assign samples to an empty pool");
  std::vector<std::size_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = (first_index + i) % pool_size;
  return out;
}

namespace {

struct Slot {
  bool done = false;
  bool abandoned = false;
  std::optional<AgentOutput> output;
  BackendFailure failure = BackendFailure::transport;
  std::string message;
};

// Owned jointly by the caller and the workers so a worker that outlives its
// deadline still writes into valid memory.
struct Batch {
  std::mutex mu;
  std::condition_variable cv;
  std::vector<Slot> slots;
};

struct Job {
  std::shared_ptr<Batch> batch;
  std::size_t slot = 0;
  std::shared_ptr<backends::Agent> agent;
  graph::TaskSpec task;
  backends::AgentConfig config;
  std::vector<graph::ContextInput> context;
  std::size_t sample_index = 0;
  int round = 0;
  std::optional<backends::SharedDraw> shared;

  void operator()() {
    Slot result;
    try {
      backends::SampleRequest request{task, config, context, sample_index, round, shared ? &*shared : nullptr};
      result.output = agent->execute(request);
      if (result.output->backend.empty()) result.output->backend = agent->name();
      result.output->seed = config.seed;
    } catch (const BackendError& e) {
      result.failure = e.failure();
      result.message = e.what();
    } catch (const std::exception& e) {
      result.failure = BackendFailure::rejected;
      result.message = e.what();
    }
    std::lock_guard lock(batch->mu);
    Slot& s = batch->slots[slot];
    if (!s.abandoned) {
      s.output = std::move(result.output);
      s.failure = result.failure;
      s.message = std::move(result.message);
    }
    s.done = true;
    batch->cv.notify_all();
  }
};

}  // namespace

Executor::Executor(const AgentPool& pool, ExecutorOptions options) : pool_(pool), options_(options) {
  if (options_.max_concurrency == 0) throw ValidationError("max_concurrency must be >= 1");
  if (options_.sample_deadline.count() <= 0) throw ValidationError("sample deadline must be positive");
}

SampleSet Executor::sample_task(const SampleRequestSpec& request) const {
  const auto& sampling = request.sampling;
  if (request.count == 0) throw ValidationError("sample_task needs count >= 1");
  if (request.first_index + request.count > static_cast<std::size_t>(sampling.n_max)) {
    throw ValidationError("task '" + request.task.id + "' would exceed n_max = " + std::to_string(sampling.n_max));
  }
  const auto agents = pool_.select(sampling);
  const auto positions = assign_backends(agents.size(), request.first_index, request.count);
  const backends::AgentConfig base = backends::generate_agent_config(request.task, sampling);
  const std::vector<graph::ContextInput> context(request.context.begin(), request.context.end());

  const auto start = Clock::now();
  auto batch = std::make_shared<Batch>();
  batch->slots.resize(request.count);

  enum class State { waiting, running, finished };
  std::vector<State> state(request.count, State::waiting);
  std::vector<Clock::time_point> deadline(request.count);
  std::vector<std::thread> threads(request.count);
  std::size_t next = 0;
  std::size_t running = 0;
  std::size_t finished = 0;

  auto launch = [&](std::size_t i) {
    const auto& agent = agents[positions[i]];
    Job job;
    job.batch = batch;
    job.slot = i;
    job.agent = agent;
    job.task = request.task;
    job.config = base;
    job.config.model = agent->name();
    job.sample_index = request.first_index + i;
    job.round = request.round;
    job.config.seed = sample_seed(request.run_seed, request.task.id, job.sample_index, request.round);
    job.context = context;
    if (request.shared != nullptr) {
      if (auto it = request.shared->find(agent->family()); it != request.shared->end()) job.shared = it->second;
    }
    deadline[i] = Clock::now() + options_.sample_deadline;
    state[i] = State::running;
    threads[i] = std::thread(std::move(job));
    ++running;
  };

  std::unique_lock lock(batch->mu);
  while (finished < request.count) {
    while (next < request.count && running < options_.max_concurrency) {
      lock.unlock();
      launch(next++);
      lock.lock();
    }
    auto earliest = Clock::time_point::max();
    for (std::size_t i = 0; i < request.count; ++i) {
      if (state[i] == State::running) earliest = std::min(earliest, deadline[i]);
    }
    batch->cv.wait_until(lock, earliest, [&] {
      for (std::size_t i = 0; i < request.count; ++i) {
        if (state[i] == State::running && batch->slots[i].done) return true;
      }
      return false;
    });
    const auto now = Clock::now();
    for (std::size_t i = 0; i < request.count; ++i) {
      if (state[i] != State::running) continue;
      Slot& s = batch->slots[i];
      if (s.done) {
        state[i] = State::finished;
      } else if (now >= deadline[i]) {
        s.abandoned = true;
        s.failure = BackendFailure::timeout;
        s.message = "sample exceeded the " + std::to_string(options_.sample_deadline.count()) + " ms deadline";
        state[i] = State::finished;
      } else {
        continue;
      }
      --running;
      ++finished;
    }
  }
  lock.unlock();

  for (std::size_t i = 0; i < request.count; ++i) {
    if (!threads[i].joinable()) continue;
    if (batch->slots[i].abandoned) {
      threads[i].detach();
    } else {
      threads[i].join();
    }
  }

  SampleSet set;
  set.task_id = request.task.id;
  set.round = request.round;
  for (std::size_t i = 0; i < request.count; ++i) {
    Slot& s = batch->slots[i];
    const std::size_t index = request.first_index + i;
    if (!s.abandoned && s.output) {
      set.outputs.push_back(Sample{index, request.round, std::move(*s.output)});
    } else {
      set.failures.push_back(
          SampleFailure{index, request.round, agents[positions[i]]->name(), s.failure, std::move(s.message)});
    }
  }
  set.wall_time = Clock::now() - start;
  return set;
}

}  // namespace voteflow::executor
