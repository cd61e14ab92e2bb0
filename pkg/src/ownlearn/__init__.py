"""Learning ownership norms and relations from interactive instruction."""

from .dsl import (ALLOW, ANY, FORBID, Atom, ActionSymbol, PredicateSchema, Rule,
                  RuleParseError, Vocabulary, format_rule, make_rule, parse_rule)
from .world import (Claim, Instruction, ObjectState, Permission,
                    UnknownEntityError, WorldState)
from .rules import RuleSet, is_covered, merge_rule, refinements, rule_diff, subsumes
from .evaluation import (eval_atom, eval_rule, eval_rule_set, false_positive_val,
                         find_cover_rules, find_covered_examples, true_positive_val)
from .induction import (LearnerState, batch_reinduce, cover_example, cover_rule,
                        rule_search, uncover_example, uncover_rule)
from .percepts import OwnershipPredictor, featurize, train_agent_model
from .inference import OwnershipSystem, bayes_update, conflict_fraction
from .agent import decide_action, run_task_with_feedback
from .simulation import (GroundTruth, SimConfig, generate_world,
                         metrics_accuracy_f1, run_norm_learning,
                         run_prediction_inference, run_task_experiment)

__version__ = "0.1.0"
