// SPDX-License-Identifier: Apache-2.0
// Regenerates the perceptual feature extractor fixture from its seed.
#include <iostream>

#include "arthdr/hdr_io.hpp"
#include "arthdr/losses.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_extractor_fixture OUT.ahpx\n";
    return 1;
  }
  const arthdr::PerceptualExtractorSpec spec;
  const auto ex = arthdr::PerceptualExtractor<float>::generate(spec);
  arthdr::write_file(argv[1], arthdr::encode_extractor(spec, ex.weights()));
  return 0;
}
