package demo.io;

import java.io.BufferedReader;
import java.io.IOException;
import java.io.Reader;
import java.util.ArrayList;
import java.util.List;

public class CsvImporter {
    private final char separator;
    private int skipped;

    public CsvImporter(char separator) {
        this.separator = separator;
    }

    public List<String[]> importRows(Reader source, boolean hasHeader) throws IOException {
        List<String[]> rows = new ArrayList<>();
        BufferedReader in = new BufferedReader(source);
        String line;
        if (hasHeader) {
            in.readLine();
        }
        while ((line = in.readLine()) != null) {
            if (line.isBlank() || line.startsWith("#")) {
                skipped++;
                continue;
            }
            List<String> cells = new ArrayList<>();
            StringBuilder cell = new StringBuilder();
            boolean quoted = false;
            for (int i = 0; i < line.length(); i++) {
                char c = line.charAt(i);
                if (c == '"') {
                    quoted = !quoted;
                } else if (c == separator && !quoted) {
                    cells.add(cell.toString());
                    cell.setLength(0);
                } else {
                    cell.append(c);
                }
            }
            cells.add(cell.toString());
            rows.add(cells.toArray(new String[0]));
        }
        return rows;
    }

    public int skipped() {
        return skipped;
    }
}
