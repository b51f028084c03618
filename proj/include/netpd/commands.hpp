#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace netpd {

// Exit codes: 0 success, 1 runtime failure, 2 invalid configuration or usage.
int cli_main(std::vector<std::string> args, std::ostream& out, std::ostream& err);
int cli_main(int argc, char** argv);

}  // namespace netpd
