from .attack import (ALGOS, FULL_BOUNDS, PRINTABLE_BOUNDS, AttackResult, AttackState,
                     BudgetExhausted, CountedObjective, IterationRecord, OptimizerConfig,
                     StepPolicy, preset, run_attack, update_best)
from .explore import GeneticExplorer, explore_resample, ga_explore, langevin_step
from .frames import DirectionFrame, sample_direction_frame
from .steps import (adaptive_stepsize, armijo_linesearch, inverse_sqrt_stepsize,
                    langevin_beta, smoothing_update)
from .surrogates import (NonFiniteObjectiveError, SurrogateGradient, central_surrogate,
                         forward_surrogate)
