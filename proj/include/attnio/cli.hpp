#pragma once

#include <string>
#include <vector>

namespace attnio {

/**
 * Runs one CLI invocation. args holds everything after the program name.
 * Returns 0 on success, 1 when a requested check fails or a run errors out,
 * and 2 on usage errors.
 */
int dispatch(const std::vector<std::string>& args);

}  // namespace attnio
