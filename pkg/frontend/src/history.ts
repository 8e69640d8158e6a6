// Bounded undo/redo history over mask buffers. Snapshots are exact copies,
// so undo -> redo restores buffers bit-for-bit.

import { MaskBuffer } from "./maskBuffer";

export const HISTORY_CAPACITY = 50;

export class History {
  private snapshots: MaskBuffer[] = [];
  private cursor = -1; // index of the current snapshot

  constructor(private capacity: number = HISTORY_CAPACITY) {
    if (capacity < 1) throw new Error("history capacity must be >= 1");
  }

  // Record the state *after* an edit; discards any redo tail.
  push(state: MaskBuffer): void {
    this.snapshots.length = this.cursor + 1;
    this.snapshots.push(state.clone());
    if (this.snapshots.length > this.capacity) {
      this.snapshots.shift();
    }
    this.cursor = this.snapshots.length - 1;
  }

  canUndo(): boolean {
    return this.cursor > 0;
  }

  canRedo(): boolean {
    return this.cursor < this.snapshots.length - 1;
  }

  undo(): MaskBuffer | null {
    if (!this.canUndo()) return null;
    this.cursor -= 1;
    return this.snapshots[this.cursor].clone();
  }

  redo(): MaskBuffer | null {
    if (!this.canRedo()) return null;
    this.cursor += 1;
    return this.snapshots[this.cursor].clone();
  }

  depth(): number {
    return this.snapshots.length;
  }
}
