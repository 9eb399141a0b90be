#include "dbcd/errors.hpp"

#include <cstdio>

namespace dbcd {

void warn(const std::string& message) {
    std::fprintf(stderr, "[dbcd warn] %s\n", message.c_str());
}

} // namespace dbcd
