/** Configurable key bindings. Defaults: arrow keys for the 2AFC choice,
 * F = intact / J = scrambled in detection blocks, Escape to terminate.
 */

export interface KeyBindings {
  left: string;
  right: string;
  intact: string;
  scrambled: string;
  terminate: string;
  continue_: string;
}

export const DEFAULT_KEYS: KeyBindings = {
  left: "ArrowLeft",
  right: "ArrowRight",
  intact: "KeyF",
  scrambled: "KeyJ",
  terminate: "Escape",
  continue_: "Space",
};

/** Wait for one of the mapped keys; resolves with the binding name. */
export function awaitKey<T extends string>(
  mapping: Record<string, T>,
  target: EventTarget = window,
): Promise<T> {
  return new Promise((resolve) => {
    const handler = (event: Event) => {
      const code = (event as KeyboardEvent).code;
      const hit = mapping[code];
      if (hit !== undefined) {
        target.removeEventListener("keydown", handler);
        resolve(hit);
      }
    };
    target.addEventListener("keydown", handler);
  });
}
