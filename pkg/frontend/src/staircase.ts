/** 3-down/1-up presentation-time staircase (client-side mirror of the
 * analysis kit's procedure): a third consecutive correct response lowers the
 * duration one step, any error raises it one step, both clamped and both
 * resetting the streak counter.
 */

export interface StaircaseState {
  currentDuration: number;
  step: number;
  floor: number;
  ceiling: number;
  consecutiveCorrect: number;
  history: Array<{ duration: number; correct: boolean }>;
}

export function initialStaircase(initialDuration = 50, step = 10, floor = 10, ceiling = 200): StaircaseState {
  return { currentDuration: initialDuration, step, floor, ceiling, consecutiveCorrect: 0, history: [] };
}

export function staircaseUpdate(state: StaircaseState, correct: boolean): StaircaseState {
  const history = [...state.history, { duration: state.currentDuration, correct }];
  if (correct) {
    const streak = state.consecutiveCorrect + 1;
    if (streak >= 3) {
      return {
        ...state,
        currentDuration: Math.max(state.floor, state.currentDuration - state.step),
        consecutiveCorrect: 0,
        history,
      };
    }
    return { ...state, consecutiveCorrect: streak, history };
  }
  return {
    ...state,
    currentDuration: Math.min(state.ceiling, state.currentDuration + state.step),
    consecutiveCorrect: 0,
    history,
  };
}

/** Second-lowest distinct duration viewed in the block. */
export function thresholdEstimate(history: Array<{ duration: number }>): number {
  const distinct = [...new Set(history.map((h) => h.duration))].sort((a, b) => a - b);
  if (distinct.length < 2) {
    throw new Error("threshold estimate needs at least two distinct durations");
  }
  return distinct[1]!;
}
