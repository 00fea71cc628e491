#include "dsnet/common.hpp"

#include <sstream>

namespace dsnet {

void invariant_failed(const char* expr, const char* file, int line, const std::string& msg) {
  std::ostringstream os;
  os << "invariant violated: " << expr << " (" << file << ":" << line << ")";
  if (!msg.empty()) os << ": " << msg;
  throw InvariantViolation(os.str());
}

}  // namespace dsnet
