#pragma once

#include <mutex>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace semvar {

enum class LogLevel { debug, info, warn, error };

inline std::string_view to_string(LogLevel level) noexcept
{
    switch (level) {
    case LogLevel::debug: return "debug";
    case LogLevel::info: return "info";
    case LogLevel::warn: return "warn";
    case LogLevel::error: return "error";
    }
    return "?";
}

struct LogRecord {
    LogLevel level;
    std::string stage;
    std::string doc;
    std::string message;
};

/// Thread-safe line logger: `level\tstage\tdoc\tmessage`. Tabs and newlines
/// inside fields are replaced by spaces so each record stays on one line.
class Logger {
public:
    explicit Logger(std::ostream* sink = nullptr, LogLevel threshold = LogLevel::info, bool keep = false)
        : sink_(sink), threshold_(threshold), keep_(keep)
    {
    }

    void log(LogLevel level, std::string_view stage, std::string_view doc, std::string_view message)
    {
        std::lock_guard lock(mutex_);
        if (keep_) records_.push_back({level, std::string(stage), std::string(doc), std::string(message)});
        if (sink_ == nullptr || level < threshold_) return;
        *sink_ << to_string(level) << '\t' << clean(stage) << '\t' << clean(doc) << '\t' << clean(message) << '\n';
        sink_->flush();
    }

    void info(std::string_view stage, std::string_view doc, std::string_view message)
    {
        log(LogLevel::info, stage, doc, message);
    }
    void warn(std::string_view stage, std::string_view doc, std::string_view message)
    {
        log(LogLevel::warn, stage, doc, message);
    }
    void error(std::string_view stage, std::string_view doc, std::string_view message)
    {
        log(LogLevel::error, stage, doc, message);
    }

    std::vector<LogRecord> records() const
    {
        std::lock_guard lock(mutex_);
        return records_;
    }

private:
    static std::string clean(std::string_view s)
    {
        std::string out(s);
        for (char& c : out) {
            if (c == '\t' || c == '\n' || c == '\r') c = ' ';
        }
        return out;
    }

    std::ostream* sink_;
    LogLevel threshold_;
    bool keep_;
    mutable std::mutex mutex_;
    std::vector<LogRecord> records_;
};

} // namespace semvar
