#pragma once

// Umbrella header for the whole library.

#include "emoeval/clients.hpp"
#include "emoeval/config.hpp"
#include "emoeval/corpus.hpp"
#include "emoeval/dialogue.hpp"
#include "emoeval/emotion.hpp"
#include "emoeval/estimator.hpp"
#include "emoeval/json_io.hpp"
#include "emoeval/markov.hpp"
#include "emoeval/pipeline.hpp"
#include "emoeval/report.hpp"
#include "emoeval/rng.hpp"
#include "emoeval/scorer.hpp"
#include "emoeval/strategy.hpp"
