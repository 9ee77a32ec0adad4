#pragma once

#include <array>
#include <utility>

// Site orderings transcribed from the mapping figures: entry p is the (row, col)
// of chain index p + 1. Row 0 is the bottom row, column 0 the left column.

inline constexpr std::array<std::pair<int, int>, 4> kFig1a{{
    {0, 0}, {1, 0}, {1, 1}, {0, 1},
}};

inline constexpr std::array<std::pair<int, int>, 16> kFig1b{{
    {0, 0}, {0, 1}, {1, 1}, {1, 0}, {2, 0}, {3, 0}, {3, 1}, {2, 1},
    {2, 2}, {3, 2}, {3, 3}, {2, 3}, {1, 3}, {1, 2}, {0, 2}, {0, 3},
}};

inline constexpr std::array<std::pair<int, int>, 64> kFig2aHilbert{{
    {0, 0}, {1, 0}, {1, 1}, {0, 1}, {0, 2}, {0, 3}, {1, 3}, {1, 2},
    {2, 2}, {2, 3}, {3, 3}, {3, 2}, {3, 1}, {2, 1}, {2, 0}, {3, 0},
    {4, 0}, {4, 1}, {5, 1}, {5, 0}, {6, 0}, {7, 0}, {7, 1}, {6, 1},
    {6, 2}, {7, 2}, {7, 3}, {6, 3}, {5, 3}, {5, 2}, {4, 2}, {4, 3},
    {4, 4}, {4, 5}, {5, 5}, {5, 4}, {6, 4}, {7, 4}, {7, 5}, {6, 5},
    {6, 6}, {7, 6}, {7, 7}, {6, 7}, {5, 7}, {5, 6}, {4, 6}, {4, 7},
    {3, 7}, {2, 7}, {2, 6}, {3, 6}, {3, 5}, {3, 4}, {2, 4}, {2, 5},
    {1, 5}, {1, 4}, {0, 4}, {0, 5}, {0, 6}, {1, 6}, {1, 7}, {0, 7},
}};

inline constexpr std::array<std::pair<int, int>, 64> kFig2bSnake{{
    {0, 0}, {0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}, {0, 6}, {0, 7},
    {1, 7}, {1, 6}, {1, 5}, {1, 4}, {1, 3}, {1, 2}, {1, 1}, {1, 0},
    {2, 0}, {2, 1}, {2, 2}, {2, 3}, {2, 4}, {2, 5}, {2, 6}, {2, 7},
    {3, 7}, {3, 6}, {3, 5}, {3, 4}, {3, 3}, {3, 2}, {3, 1}, {3, 0},
    {4, 0}, {4, 1}, {4, 2}, {4, 3}, {4, 4}, {4, 5}, {4, 6}, {4, 7},
    {5, 7}, {5, 6}, {5, 5}, {5, 4}, {5, 3}, {5, 2}, {5, 1}, {5, 0},
    {6, 0}, {6, 1}, {6, 2}, {6, 3}, {6, 4}, {6, 5}, {6, 6}, {6, 7},
    {7, 7}, {7, 6}, {7, 5}, {7, 4}, {7, 3}, {7, 2}, {7, 1}, {7, 0},
}};

// Tree edges of the 4x4 TTN figure, chain labels, smaller label first.
inline constexpr std::array<std::pair<int, int>, 15> kFig6aEdges{{
    {1, 2}, {2, 3}, {3, 4}, {3, 9}, {4, 5}, {5, 6}, {6, 7}, {7, 8},
    {9, 10}, {10, 11}, {11, 12}, {12, 13}, {13, 14}, {14, 15}, {15, 16},
}};

inline constexpr std::array<std::pair<int, int>, 15> kFig6bEdges{{
    {1, 2}, {2, 3}, {3, 4}, {3, 14}, {4, 5}, {5, 6}, {6, 7}, {7, 8},
    {9, 10}, {10, 11}, {11, 12}, {12, 13}, {13, 14}, {14, 15}, {15, 16},
}};
