#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace voteflow::state {

enum class EventKind {
  run_started,
  task_started,
  samples_collected,
  judge_round,
  escalated,
  task_completed,
  tool_invoked,
  run_completed,
  run_aborted,
};

[[nodiscard]] std::string_view to_string(EventKind kind);
[[nodiscard]] EventKind parse_event_kind(std::string_view text);

/// Kinds that must be on stable storage before the engine moves on.
[[nodiscard]] bool is_boundary(EventKind kind);

struct RunEvent {
  std::uint64_t seq = 0;
  std::string timestamp;  // UTC, ISO-8601 with milliseconds
  EventKind kind = EventKind::run_started;
  nlohmann::json payload = nlohmann::json::object();

  friend bool operator==(const RunEvent&, const RunEvent&) = default;
};

/// One JSON object per line: {"seq","ts","kind","payload"}.
[[nodiscard]] std::string encode_event(const RunEvent& event);
[[nodiscard]] RunEvent decode_event(std::string_view line);

/// Byte storage behind the log.
class LogStore {
 public:
  virtual ~LogStore() = default;
  [[nodiscard]] virtual std::string read_all() = 0;
  virtual void truncate(std::size_t size) = 0;
  /// Appends bytes; with `durable` they are on stable storage on return.
  virtual void append(std::string_view bytes, bool durable) = 0;
};

/// Append-only file; durable appends are fsynced.
class FileLogStore final : public LogStore {
 public:
  explicit FileLogStore(std::filesystem::path path);
  ~FileLogStore() override;
  FileLogStore(const FileLogStore&) = delete;
  FileLogStore& operator=(const FileLogStore&) = delete;

  std::string read_all() override;
  void truncate(std::size_t size) override;
  void append(std::string_view bytes, bool durable) override;
  [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  int fd_ = -1;
};

class MemoryLogStore final : public LogStore {
 public:
  MemoryLogStore() = default;
  explicit MemoryLogStore(std::string initial) : data_(std::move(initial)) {}

  std::string read_all() override;
  void truncate(std::size_t size) override;
  void append(std::string_view bytes, bool durable) override;
  [[nodiscard]] std::string contents() const;

 private:
  mutable std::mutex mu_;
  std::string data_;
};

struct ParsedLog {
  std::vector<RunEvent> events;
  std::size_t valid_bytes = 0;  // length of the intact prefix
  bool torn_tail = false;       // an incomplete final record was dropped
};

/// Parses a log. An unterminated or unparsable final line is dropped; a bad
/// record before it, or a seq that is not 0, 1, 2, ..., is a StorageError.
[[nodiscard]] ParsedLog parse_log(std::string_view content);

/// Reads a log file; a missing file is an empty log.
[[nodiscard]] ParsedLog read_log_file(const std::filesystem::path& path);

/// Single-writer funnel for run events. Opening a store truncates a torn
/// tail so new records start on a clean line.
class EventLog {
 public:
  explicit EventLog(std::shared_ptr<LogStore> store);

  /// Events present when the log was opened.
  [[nodiscard]] const std::vector<RunEvent>& existing() const noexcept { return existing_; }
  [[nodiscard]] bool recovered_torn_tail() const noexcept { return torn_tail_; }

  /// Appends with the next seq and returns it. Thread-safe.
  std::uint64_t append(EventKind kind, nlohmann::json payload);

  /// Appends a fully formed event; its seq must be the next one.
  void append_event(const RunEvent& event);

  [[nodiscard]] std::uint64_t next_seq() const;

 private:
  void write_locked(const RunEvent& event);

  std::shared_ptr<LogStore> store_;
  std::vector<RunEvent> existing_;
  bool torn_tail_ = false;
  mutable std::mutex mu_;
  std::uint64_t next_seq_ = 0;
};

[[nodiscard]] std::string utc_timestamp();

}  // namespace voteflow::state
