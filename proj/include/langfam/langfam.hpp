#pragma once

#include "langfam/error.hpp"
#include "langfam/util.hpp"
#include "langfam/taxonomy.hpp"
#include "langfam/text.hpp"
#include "langfam/corpus.hpp"
#include "langfam/embedding.hpp"
#include "langfam/embedding_cache.hpp"
#include "langfam/similarity.hpp"
#include "langfam/clustering.hpp"
#include "langfam/planner.hpp"
#include "langfam/report.hpp"
#include "langfam/synthetic.hpp"
#include "langfam/pipeline.hpp"
