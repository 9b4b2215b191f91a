#pragma once

namespace latentmark::cli {

// exit codes: 0 success, 2 usage error, 3 validation error, 4 runtime failure
int run(int argc, char** argv);

}  // namespace latentmark::cli
