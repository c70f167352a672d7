#include "banker/common.hpp"

#include <iostream>
#include <mutex>

namespace banker {

void log_warning(const std::string& message) {
  static std::mutex mutex;
  std::lock_guard lock(mutex);
  std::cerr << "warning: " << message << '\n';
}

}  // namespace banker
