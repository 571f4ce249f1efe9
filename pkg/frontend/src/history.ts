// Undo/redo for attribute-map edits.  Each entry stores the touched region
// of one plane before and after the edit, so undo restores the previous map
// exactly without snapshotting whole planes.

import { AttributeMap, Channel, Rect, blit, snapshot } from "./attrmap.js";

interface Entry {
  channel: Channel;
  rect: Rect;
  before: Float32Array;
  after: Float32Array;
}

export class UndoHistory {
  private undoStack: Entry[] = [];
  private redoStack: Entry[] = [];
  private readonly limit: number;

  constructor(limit = 200) {
    this.limit = limit;
  }

  canUndo(): boolean {
    return this.undoStack.length > 0;
  }

  canRedo(): boolean {
    return this.redoStack.length > 0;
  }

  // Wrap a mutation of `channel` inside `rect`; records before/after.
  apply(map: AttributeMap, channel: Channel, rect: Rect,
        mutate: () => void): void {
    const before = snapshot(map, channel, rect);
    mutate();
    const after = snapshot(map, channel, rect);
    this.undoStack.push({ channel, rect, before, after });
    if (this.undoStack.length > this.limit) this.undoStack.shift();
    this.redoStack = [];
  }

  undo(map: AttributeMap): boolean {
    const entry = this.undoStack.pop();
    if (!entry) return false;
    blit(map, entry.channel, entry.rect, entry.before);
    this.redoStack.push(entry);
    return true;
  }

  redo(map: AttributeMap): boolean {
    const entry = this.redoStack.pop();
    if (!entry) return false;
    blit(map, entry.channel, entry.rect, entry.after);
    this.undoStack.push(entry);
    return true;
  }

  clear(): void {
    this.undoStack = [];
    this.redoStack = [];
  }
}
