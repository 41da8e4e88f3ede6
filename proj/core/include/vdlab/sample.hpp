#pragma once

#include <stdexcept>
#include <string>

namespace vdlab {

// Dataset partitions: P1 = pre-fix vulnerable, P2 = post-fix repaired,
// P3 = unchanged easy negatives from patched files.
enum class Partition { P1, P2, P3 };

inline const char* to_string(Partition p) {
    switch (p) {
        case Partition::P1: return "P1";
        case Partition::P2: return "P2";
        case Partition::P3: return "P3";
    }
    throw std::invalid_argument("unknown partition");
}

inline Partition partition_from_string(const std::string& s) {
    if (s == "P1") return Partition::P1;
    if (s == "P2") return Partition::P2;
    if (s == "P3") return Partition::P3;
    throw std::invalid_argument("unknown partition '" + s + "'");
}

// One labeled function. P1 implies label 1; P2 and P3 imply label 0.
struct FunctionSample {
    std::string id;
    std::string code;
    int label = 0;
    Partition partition = Partition::P3;
    std::string cwe;      // optional, empty when absent
    std::string project;  // optional
    std::string commit;   // optional

    void validate() const {
        if (label != 0 && label != 1)
            throw std::invalid_argument("sample " + id + ": label must be 0 or 1");
        const bool pos = partition == Partition::P1;
        if ((label == 1) != pos)
            throw std::invalid_argument("sample " + id + ": partition " + to_string(partition) +
                                        " inconsistent with label " + std::to_string(label));
    }
};

}  // namespace vdlab
