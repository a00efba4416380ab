// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <iosfwd>
#include <span>
#include <string>

#include "prgds/model.hpp"

namespace prgds {

// Flat key=value text format for ModelHyper. Recognized keys:
//   epsilon_theta, epsilon_lambda, alpha0, a0, b0, K, stationary_rho
// Unlisted keys keep their defaults; '#' starts a comment; blank lines are
// ignored; a repeated key is an error. stationary_rho accepts 0/1 or
// true/false. Parsing does not validate ranges; call validate() at the
// point of use.
ModelHyper parse_hyper(std::istream& in, const std::string& origin = "<hyper>");
ModelHyper load_hyper_file(const std::string& path);

void write_hyper(std::ostream& out, const ModelHyper& hyper,
                 std::span<const std::string> comments = {});
void write_hyper_file(const ModelHyper& hyper, const std::string& path,
                      std::span<const std::string> comments = {});

}  // namespace prgds
