#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "voteflow/backends/agent.hpp"
#include "voteflow/graph/workflow_graph.hpp"

namespace voteflow::executor {

/// The named backends available to a run, in registration order.
class AgentPool {
 public:
  void add(std::shared_ptr<backends::Agent> agent);

  [[nodiscard]] std::size_t size() const noexcept { return agents_.size(); }
  [[nodiscard]] bool empty() const noexcept { return agents_.empty(); }
  [[nodiscard]] const std::shared_ptr<backends::Agent>& at(std::size_t i) const { return agents_.at(i); }
  [[nodiscard]] std::shared_ptr<backends::Agent> find(std::string_view name) const;
  [[nodiscard]] std::vector<std::string> names() const;

  /// The agents a task samples from: the task's model_pool in its order, or
  /// the whole pool when that list is empty.
  [[nodiscard]] std::vector<std::shared_ptr<backends::Agent>> select(const graph::SamplingConfig& sampling) const;

 private:
  std::vector<std::shared_ptr<backends::Agent>> agents_;
};

/// stable_hash(run seed, task id, sample index, round). Sample indices are
/// cumulative across rounds, so every sample of a task gets a fresh seed.
[[nodiscard]] std::uint64_t sample_seed(std::uint64_t run_seed, std::string_view task_id, std::size_t sample_index,
                                        int round);

/// Round-robin backend positions for samples first..first+count-1.
[[nodiscard]] std::vector<std::size_t> assign_backends(std::size_t pool_size, std::size_t first_index,
                                                       std::size_t count);

struct Sample {
  std::size_t sample_index = 0;
  int round = 0;
  backends::AgentOutput output;
};

struct SampleFailure {
  std::size_t sample_index = 0;
  int round = 0;
  std::string backend;
  backends::BackendFailure failure = backends::BackendFailure::transport;
  std::string message;
};

/// One round's increment of a task's samples.
struct SampleSet {
  std::string task_id;
  int round = 0;
  std::vector<Sample> outputs;  // successes, by sample index
  std::vector<SampleFailure> failures;
  std::chrono::duration<double> wall_time{0};
};

struct ExecutorOptions {
  std::size_t max_concurrency = 16;  // samples in flight per round
  std::chrono::milliseconds sample_deadline{120000};
};

/// Per-family common-cause draws of one task, keyed by family name.
using SharedDraws = std::map<std::string, backends::SharedDraw, std::less<>>;

struct SampleRequestSpec {
  const graph::TaskSpec& task;
  const graph::SamplingConfig& sampling;
  std::span<const graph::ContextInput> context;
  std::uint64_t run_seed = 0;
  std::size_t first_index = 0;  // samples already requested for the task
  std::size_t count = 0;
  int round = 0;
  const SharedDraws* shared = nullptr;
};

/// Runs the redundant samples of one task concurrently. Samples that fail
/// or miss the deadline are recorded as failures and left out of the set.
class Executor {
 public:
  explicit Executor(const AgentPool& pool, ExecutorOptions options = {});

  /// Throws ValidationError when count is 0 or first_index + count exceeds
  /// n_max. Does not throw when samples fail; callers inspect the set.
  [[nodiscard]] SampleSet sample_task(const SampleRequestSpec& request) const;

  [[nodiscard]] const ExecutorOptions& options() const noexcept { return options_; }

 private:
  const AgentPool& pool_;
  ExecutorOptions options_;
};

}  // namespace voteflow::executor
