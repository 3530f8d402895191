#include "voteflow/state/event_log.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>

#include <fmt/format.h>

#include "voteflow/error.hpp"

namespace voteflow::state {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<EventKind, std::string_view>, 9> kKinds{{
    {EventKind::run_started, "run_started"},
    {EventKind::task_started, "task_started"},
    {EventKind::samples_collected, "samples_collected"},
    {EventKind::judge_round, "judge_round"},
    {EventKind::escalated, "escalated"},
    {EventKind::task_completed, "task_completed"},
    {EventKind::tool_invoked, "tool_invoked"},
    {EventKind::run_completed, "run_completed"},
    {EventKind::run_aborted, "run_aborted"},
}};

[[noreturn]] void storage_failure(const std::string& what) {
  throw StorageError(what + ": " + std::strerror(errno));
}

}  // namespace

std::string_view to_string(EventKind kind) {
  for (const auto& [k, name] : kKinds) {
    if (k == kind) return name;
  }
  return "unknown";
}

EventKind parse_event_kind(std::string_view text) {
  for (const auto& [k, name] : kKinds) {
    if (name == text) return k;
  }
  throw StorageError("unknown event kind '" + std::string(text) + "'");
}

bool is_boundary(EventKind kind) {
  switch (kind) {
    case EventKind::run_started:
    case EventKind::task_completed:
    case EventKind::tool_invoked:
    case EventKind::run_completed:
    case EventKind::run_aborted:
      return true;
    default:
      return false;
  }
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t secs = std::chrono::system_clock::to_time_t(now);
  const auto ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}.{:03}Z", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                     tm.tm_hour, tm.tm_min, tm.tm_sec, ms);
}

std::string encode_event(const RunEvent& event) {
  json j{{"seq", event.seq}, {"ts", event.timestamp}, {"kind", to_string(event.kind)}, {"payload", event.payload}};
  return j.dump();
}

RunEvent decode_event(std::string_view line) {
  json j = json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw StorageError("event record is not a JSON object");
  try {
    RunEvent e;
    e.seq = j.at("seq").get<std::uint64_t>();
    e.timestamp = j.at("ts").get<std::string>();
    e.kind = parse_event_kind(j.at("kind").get<std::string>());
    e.payload = j.at("payload");
    return e;
  } catch (const json::exception& ex) {
    throw StorageError(std::string("malformed event record: ") + ex.what());
  }
}

ParsedLog parse_log(std::string_view content) {
  ParsedLog out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < content.size()) {
    const std::size_t nl = content.find('\n', pos);
    const bool terminated = nl != std::string_view::npos;
    const std::string_view line = content.substr(pos, terminated ? nl - pos : std::string_view::npos);
    const std::size_t end = terminated ? nl + 1 : content.size();
    const bool last = end == content.size();
    ++line_no;
    if (!terminated) {
      // Records are written with their newline in one append, so a missing
      // newline means the write was cut short.
      out.torn_tail = true;
      break;
    }
    RunEvent event;
    try {
      event = decode_event(line);
    } catch (const StorageError& e) {
      if (last) {
        out.torn_tail = true;
        break;
      }
      throw StorageError(fmt::format("corrupt event log record at line {}: {}", line_no, e.what()));
    }
    if (event.seq != out.events.size()) {
      throw StorageError(
          fmt::format("event log line {} has seq {}, expected {}", line_no, event.seq, out.events.size()));
    }
    out.events.push_back(std::move(event));
    pos = end;
    out.valid_bytes = end;
  }
  return out;
}

ParsedLog read_log_file(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return {};
  FileLogStore store(path);
  return parse_log(store.read_all());
}

FileLogStore::FileLogStore(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path_.parent_path(), ec);
  }
  fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) storage_failure("cannot open event log " + path_.string());
}

FileLogStore::~FileLogStore() {
  if (fd_ >= 0) ::close(fd_);
}

std::string FileLogStore::read_all() {
  std::string out;
  char buf[65536];
  off_t offset = 0;
  for (;;) {
    const ssize_t n = ::pread(fd_, buf, sizeof buf, offset);
    if (n < 0) {
      if (errno == EINTR) continue;
      storage_failure("cannot read event log " + path_.string());
    }
    if (n == 0) break;
    out.append(buf, static_cast<std::size_t>(n));
    offset += n;
  }
  return out;
}

void FileLogStore::truncate(std::size_t size) {
  if (::ftruncate(fd_, static_cast<off_t>(size)) != 0) storage_failure("cannot truncate event log");
  if (::fsync(fd_) != 0) storage_failure("cannot sync event log");
}

void FileLogStore::append(std::string_view bytes, bool durable) {
  while (!bytes.empty()) {
    const ssize_t n = ::write(fd_, bytes.data(), bytes.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      storage_failure("cannot write event log " + path_.string());
    }
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
  if (durable && ::fsync(fd_) != 0) storage_failure("cannot sync event log " + path_.string());
}

std::string MemoryLogStore::read_all() {
  std::lock_guard lock(mu_);
  return data_;
}

void MemoryLogStore::truncate(std::size_t size) {
  std::lock_guard lock(mu_);
  if (size < data_.size()) data_.resize(size);
}

void MemoryLogStore::append(std::string_view bytes, bool /*durable*/) {
  std::lock_guard lock(mu_);
  data_.append(bytes);
}

std::string MemoryLogStore::contents() const {
  std::lock_guard lock(mu_);
  return data_;
}

EventLog::EventLog(std::shared_ptr<LogStore> store) : store_(std::move(store)) {
  if (!store_) throw StorageError("event log has no store");
  const std::string content = store_->read_all();
  ParsedLog parsed = parse_log(content);
  if (parsed.valid_bytes < content.size()) store_->truncate(parsed.valid_bytes);
  torn_tail_ = parsed.torn_tail;
  existing_ = std::move(parsed.events);
  next_seq_ = existing_.size();
}

std::uint64_t EventLog::append(EventKind kind, json payload) {
  std::lock_guard lock(mu_);
  RunEvent e{next_seq_, utc_timestamp(), kind, std::move(payload)};
  write_locked(e);
  return e.seq;
}

void EventLog::append_event(const RunEvent& event) {
  std::lock_guard lock(mu_);
  if (event.seq != next_seq_) {
    throw StorageError(fmt::format("stale or out-of-order seq {} (next is {})", event.seq, next_seq_));
  }
  write_locked(event);
}

void EventLog::write_locked(const RunEvent& event) {
  std::string line = encode_event(event);
  line.push_back('\n');
  store_->append(line, is_boundary(event.kind));
  ++next_seq_;
}

std::uint64_t EventLog::next_seq() const {
  std::lock_guard lock(mu_);
  return next_seq_;
}

}  // namespace voteflow::state
