#pragma once

#include <string>
#include <utility>

#include "sfda/dataset.hpp"

namespace sfda {

// Loads an image/label pair of IDX files (the big-endian binary container
// used for handwritten-digit corpora), keeping only the two requested label
// classes. Pixel values are scaled to [0, 1]; the first class maps to label 0
// and the second to label 1.
Dataset read_idx(const std::string& images_path, const std::string& labels_path,
                 std::pair<int, int> class_pair);

}
