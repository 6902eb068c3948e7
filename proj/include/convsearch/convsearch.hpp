#pragma once

#include "convsearch/config.hpp"
#include "convsearch/conversation.hpp"
#include "convsearch/corpus.hpp"
#include "convsearch/error.hpp"
#include "convsearch/eval.hpp"
#include "convsearch/fusion.hpp"
#include "convsearch/index.hpp"
#include "convsearch/llm.hpp"
#include "convsearch/llm_tasks.hpp"
#include "convsearch/offline_llm.hpp"
#include "convsearch/pipeline.hpp"
#include "convsearch/prompts.hpp"
#include "convsearch/scorer.hpp"
#include "convsearch/text.hpp"
#include "convsearch/types.hpp"
