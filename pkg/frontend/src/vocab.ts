// WordPiece vocabulary: same file format and greedy longest-match
// segmentation as the decoder side (one piece per line, ▁ marks word starts).

export const MARKER = "▁";

export class Vocab {
  readonly pieces: string[];
  readonly size: number;
  readonly isStart: boolean[];
  private startMap = new Map<string, number>();
  private contMap = new Map<string, number>();
  private maxStart = 0;
  private maxCont = 0;

  constructor(pieces: string[], readonly marker: string = MARKER) {
    this.pieces = pieces;
    this.size = pieces.length;
    this.isStart = pieces.map((p) => p.startsWith(marker));
    pieces.forEach((p, i) => {
      const content = this.isStart[i] ? p.slice(marker.length) : p;
      if (this.isStart[i]) {
        this.startMap.set(content, i);
        this.maxStart = Math.max(this.maxStart, content.length);
      } else {
        this.contMap.set(content, i);
        this.maxCont = Math.max(this.maxCont, content.length);
      }
    });
  }

  static fromFile(text: string, marker: string = MARKER): Vocab {
    const pieces = text.split("\n").filter((l) => l.length > 0);
    return new Vocab(pieces, marker);
  }

  tokenize(word: string): number[] {
    word = word.toLowerCase();
    const out: number[] = [];
    let pos = 0;
    let wantStart = true;
    while (pos < word.length) {
      const table = wantStart ? this.startMap : this.contMap;
      const limit = Math.min(wantStart ? this.maxStart : this.maxCont, word.length - pos);
      let found = -1;
      for (let len = limit; len >= 1; len--) {
        const idx = table.get(word.slice(pos, pos + len));
        if (idx !== undefined) {
          found = idx;
          pos += len;
          break;
        }
      }
      if (found < 0) throw new Error(`cannot segment ${JSON.stringify(word)} at offset ${pos}`);
      out.push(found);
      wantStart = false;
    }
    return out;
  }
}
