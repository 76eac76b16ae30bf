#pragma once

#include <functional>
#include <stdexcept>
#include <string>

namespace latefusion {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public Error { public: using Error::Error; };
class PreprocessError : public Error { public: using Error::Error; };
class StatsError : public Error { public: using Error::Error; };
class ModelError : public Error { public: using Error::Error; };
class PredictError : public Error { public: using Error::Error; };
class SplitError : public Error { public: using Error::Error; };
class ElbowError : public Error { public: using Error::Error; };
class MetricsError : public Error { public: using Error::Error; };
class FusionError : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };
class InputError : public Error { public: using Error::Error; };  // a referenced file is absent

// Non-fatal diagnostics (unusable features, separation, skipped trees) go
// through a process-wide sink. The default writes to stderr.
using WarningSink = std::function<void(const std::string&)>;

void set_warning_sink(WarningSink sink);
void warn(const std::string& message);

}  // namespace latefusion
