// Apache License, Version 2.0, refer to LICENSE.txt
//
// Acceptance gate runner: executes one numbered criterion per invocation and
// prints a single PASS/FAIL line to stdout.  ctest registers one instance per
// criterion (acceptance_1 .. acceptance_9); progress notes go to stderr.
#include <cstdlib>
#include <iostream>

#include "prgds/selftest.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: acceptance <criterion 1.."
              << prgds::kNumAcceptanceCriteria << ">\n";
    return 2;
  }
  const int n = std::atoi(argv[1]);
  if (n < 1 || n > prgds::kNumAcceptanceCriteria) {
    std::cerr << "criterion number out of range: " << argv[1] << '\n';
    return 2;
  }
  const prgds::CheckResult result = prgds::acceptance_criterion(n, &std::cerr);
  std::cout << "ACCEPTANCE " << n << (result.pass ? " PASS" : " FAIL") << " - "
            << result.detail << std::endl;
  return result.pass ? 0 : 1;
}
